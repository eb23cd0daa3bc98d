#include "mdn/train/checkpoint.hpp"

#include "mdn/archive.hpp"
#include "mdn/error.hpp"

namespace mdn::train {

namespace {

constexpr const char* kFormat = "mdn-checkpoint";

Index meta_int(const Archive& archive, const std::string& key) {
  const std::string v = archive.meta_value(key);
  try {
    std::size_t used = 0;
    const long long parsed = std::stoll(v, &used);
    if (used == v.size()) return static_cast<Index>(parsed);
  } catch (const std::exception&) {
  }
  throw CheckpointError("checkpoint metadata '" + key + "' is missing or not an integer");
}

ModelSpec spec_from_archive(const Archive& archive) {
  if (archive.meta_value("format") != kFormat) {
    throw CheckpointError("archive is not a model checkpoint");
  }
  ModelSpec spec;
  try {
    spec.kind = parse_kind(archive.meta_value("kind"));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  spec.num_classes = meta_int(archive, "num_classes");
  spec.input_size = meta_int(archive, "input_size");
  spec.width = meta_int(archive, "width");
  const std::string seed = archive.meta_value("seed");
  try {
    spec.seed = std::stoull(seed);
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint metadata 'seed' is missing or not an integer");
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint spec is invalid: ") + e.what());
  }
  return spec;
}

}  // namespace

std::string kind_name(ModelKind kind) { return kind == ModelKind::kCrn ? "crn" : "mdn"; }

ModelKind parse_kind(const std::string& name) {
  if (name == "crn") return ModelKind::kCrn;
  if (name == "mdn") return ModelKind::kMdn;
  throw ConfigError("model kind must be 'crn' or 'mdn', got '" + name + "'");
}

void ModelSpec::validate() const {
  if (num_classes < 1) throw ConfigError("model.num_classes must be positive");
  if (kind == ModelKind::kCrn && input_size != CrnSpec::kInputSize) {
    throw ConfigError("model.input_size must be 32 for the classifier");
  }
  if (width < 1) throw ConfigError("model.width must be positive");
  if (kind == ModelKind::kMdn) {
    MfpnSpec::standard(input_size, width).validate();
  }
}

Model::Model(const ModelSpec& spec) : spec_(spec) {
  spec_.validate();
  if (spec_.kind == ModelKind::kCrn) {
    CrnSpec crn_spec;
    crn_spec.num_classes = spec_.num_classes;
    crn_ = std::make_unique<Crn>(crn_spec, spec_.seed);
  } else {
    detection::MdnSpec mdn_spec{spec_.input_size, spec_.num_classes, spec_.width};
    mdn_ = std::make_unique<detection::Mdn>(mdn_spec, spec_.seed);
  }
}

Crn& Model::crn() {
  if (!crn_) throw ContractError("model is a detector, not a classifier");
  return *crn_;
}

const Crn& Model::crn() const {
  if (!crn_) throw ContractError("model is a detector, not a classifier");
  return *crn_;
}

detection::Mdn& Model::mdn() {
  if (!mdn_) throw ContractError("model is a classifier, not a detector");
  return *mdn_;
}

const detection::Mdn& Model::mdn() const {
  if (!mdn_) throw ContractError("model is a classifier, not a detector");
  return *mdn_;
}

ParameterSet<float> Model::parameters() const {
  return crn_ ? crn_->parameters() : mdn_->parameters();
}

void save_checkpoint(const Model& model, const std::filesystem::path& dir) {
  const ModelSpec& s = model.spec();
  write_archive(dir,
                {{"format", kFormat},
                 {"kind", kind_name(s.kind)},
                 {"num_classes", std::to_string(s.num_classes)},
                 {"input_size", std::to_string(s.input_size)},
                 {"width", std::to_string(s.width)},
                 {"seed", std::to_string(s.seed)}},
                model.parameters());
}

ModelSpec read_checkpoint_spec(const std::filesystem::path& dir) {
  return spec_from_archive(read_archive(dir));
}

Model load_checkpoint(const std::filesystem::path& dir) {
  const Archive archive = read_archive(dir);
  Model model(spec_from_archive(archive));
  auto params = model.parameters();
  restore_tensors(archive, params);
  return model;
}

void load_checkpoint_into(Model& model, const std::filesystem::path& dir) {
  const Archive archive = read_archive(dir);
  auto params = model.parameters();
  restore_tensors(archive, params);
}

}  // namespace mdn::train
