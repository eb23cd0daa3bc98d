#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "mdn/crn.hpp"
#include "mdn/detection/mdn.hpp"

namespace mdn::train {

enum class ModelKind { kCrn, kMdn };

std::string kind_name(ModelKind kind);
ModelKind parse_kind(const std::string& name);  // throws ConfigError

struct ModelSpec {
  ModelKind kind = ModelKind::kCrn;
  Index num_classes = 43;  // crn: labels 0..n-1; mdn: foreground ids 1..n
  Index input_size = 32;   // crn is fixed at 32
  Index width = 256;       // mdn channel scale
  std::uint64_t seed = 0;  // initialization seed

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

// Either network behind one spec.
class Model {
 public:
  explicit Model(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  bool is_detector() const { return spec_.kind == ModelKind::kMdn; }

  Crn& crn();
  const Crn& crn() const;
  detection::Mdn& mdn();
  const detection::Mdn& mdn() const;

  ParameterSet<float> parameters() const;

 private:
  ModelSpec spec_;
  std::unique_ptr<Crn> crn_;
  std::unique_ptr<detection::Mdn> mdn_;
};

// Checkpoints are parameter archives whose metadata records the spec.
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
ModelSpec read_checkpoint_spec(const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

// Restores into an existing model; throws CheckpointError naming the first
// tensor whose name or shape disagrees.
void load_checkpoint_into(Model& model, const std::filesystem::path& dir);

}  // namespace mdn::train
