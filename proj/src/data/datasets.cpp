#include "mdn/data/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "mdn/error.hpp"

namespace mdn::data {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ';')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ';') out.emplace_back();
  return out;
}

// Semicolon table reader with a mandatory header row.
class Table {
 public:
  Table(const fs::path& path, std::vector<std::string> header) : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in_, line)) throw DataError(where(1) + ": missing header");
    line_no_ = 1;
    const auto fields = split_fields(trim(line));
    if (fields != header) {
      std::string expected;
      for (const auto& h : header) expected += (expected.empty() ? "" : ";") + h;
      throw DataError(where(1) + ": expected header '" + expected + "'");
    }
    columns_ = header.size();
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      line = trim(line);
      if (line.empty()) continue;
      fields = split_fields(line);
      if (fields.size() != columns_) {
        fail("expected " + std::to_string(columns_) + " fields, got " +
             std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }

  long integer(const std::string& field) const {
    try {
      std::size_t used = 0;
      const long v = std::stol(field, &used);
      if (used == field.size()) return v;
    } catch (const std::exception&) {
    }
    fail("'" + field + "' is not an integer");
  }

  std::size_t line() const { return line_no_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(where(line_no_) + ": " + what);
  }

 private:
  std::string where(std::size_t line) const {
    return path_.string() + " line " + std::to_string(line);
  }

  fs::path path_;
  std::ifstream in_;
  std::size_t columns_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace

std::map<int, Index> ClassificationDataset::class_counts() const {
  std::map<int, Index> counts;
  for (const auto& s : samples) ++counts[s.label];
  return counts;
}

std::vector<ClassificationRecord> read_classification_table(const fs::path& csv) {
  Table table(csv, {"Filename", "Width", "Height", "Roi.X1", "Roi.Y1", "Roi.X2", "Roi.Y2",
                    "ClassId"});
  std::vector<ClassificationRecord> records;
  std::vector<std::string> f;
  while (table.next(f)) {
    ClassificationRecord r;
    r.filename = f[0];
    r.width = table.integer(f[1]);
    r.height = table.integer(f[2]);
    r.x1 = table.integer(f[3]);
    r.y1 = table.integer(f[4]);
    r.x2 = table.integer(f[5]);
    r.y2 = table.integer(f[6]);
    r.class_id = static_cast<int>(table.integer(f[7]));
    if (r.filename.empty()) table.fail("empty filename");
    if (r.width <= 0 || r.height <= 0) table.fail("image size must be positive");
    if (r.x1 < 0 || r.y1 < 0 || r.x2 > r.width || r.y2 > r.height || r.x1 >= r.x2 ||
        r.y1 >= r.y2) {
      table.fail("ROI outside the image or empty");
    }
    if (r.class_id < 0) table.fail("negative class id");
    records.push_back(std::move(r));
  }
  return records;
}

ClassificationDataset load_classification_dataset(const fs::path& root, Index num_classes) {
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root.string());
  std::vector<fs::path> tables;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("GT-", 0) == 0 && entry.path().extension() == ".csv") {
      tables.push_back(entry.path());
    }
  }
  std::sort(tables.begin(), tables.end());
  if (tables.empty()) throw DataError("no GT-*.csv annotation tables under " + root.string());

  ClassificationDataset ds;
  ds.num_classes = num_classes;
  for (const auto& csv : tables) {
    for (const auto& r : read_classification_table(csv)) {
      if (r.class_id >= num_classes) {
        throw DataError(csv.string() + ": class id " + std::to_string(r.class_id) +
                        " outside 0.." + std::to_string(num_classes - 1));
      }
      const fs::path image_path = csv.parent_path() / r.filename;
      const Image img = read_ppm(image_path);
      if (img.width != r.width || img.height != r.height) {
        throw DataError(image_path.string() + ": size differs from annotation table");
      }
      ds.samples.push_back(
          {crop_resize(img, static_cast<double>(r.x1), static_cast<double>(r.y1),
                       static_cast<double>(r.x2), static_cast<double>(r.y2), kClassifierInput,
                       kClassifierInput),
           r.class_id});
    }
  }
  return ds;
}

ClassificationDataset balance_classes(const ClassificationDataset& dataset, Index low, Index high,
                                      std::uint64_t seed, const AugmentRanges& ranges) {
  if (low < 0 || high <= low) throw ConfigError("balance_classes: need 0 <= low < high");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    members[dataset.samples[i].label].push_back(i);
  }
  for (Index c = 0; c < dataset.num_classes; ++c) {
    if (!members.count(static_cast<int>(c))) {
      throw DataError("balance_classes: class " + std::to_string(c) + " has no samples to augment");
    }
  }
  ClassificationDataset out = dataset;
  for (const auto& [label, idx] : members) {
    const Index n = static_cast<Index>(idx.size());
    const Index target = n < low ? low : (n < high ? high : n);
    for (Index k = 0; k < target - n; ++k) {
      const auto& src = dataset.samples[idx[static_cast<std::size_t>(k % n)]];
      const std::uint64_t copy_seed =
          mix_seed(mix_seed(seed, static_cast<std::uint64_t>(label)), static_cast<std::uint64_t>(k));
      out.samples.push_back({augment_image(src.image, copy_seed, ranges), label});
    }
  }
  return out;
}

std::string DetectionDataset::group_of(int class_id) const {
  const auto it = superclass.find(class_id);
  return it == superclass.end() ? "class_" + std::to_string(class_id) : it->second;
}

DetectionDataset load_detection_dataset(const fs::path& root, const std::string& split,
                                        Index input_size, const fs::path& annotations,
                                        const fs::path& split_manifest) {
  const fs::path ann_path = annotations.empty() ? root / kAnnotationsFile : annotations;
  const fs::path split_path = split_manifest.empty() ? root / kSplitFile : split_manifest;
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root.string());
  if (input_size < 1) throw ConfigError("input size must be positive");
  DetectionDataset ds;

  std::set<int> declared;
  if (fs::exists(root / kClassesFile)) {
    Table table(root / kClassesFile, {"ClassId", "Superclass"});
    std::vector<std::string> f;
    while (table.next(f)) {
      const int id = static_cast<int>(table.integer(f[0]));
      if (id < 1) table.fail("class ids start at 1 (0 is background)");
      if (!declared.insert(id).second) table.fail("duplicate class id");
      ds.superclass[id] = f[1];
    }
  }

  std::vector<std::string> order;
  {
    Table table(split_path, {"Filename", "Split"});
    std::vector<std::string> f;
    std::set<std::string> seen;
    while (table.next(f)) {
      if (!seen.insert(f[0]).second) table.fail("duplicate entry for " + f[0]);
      if (f[1] == split) order.push_back(f[0]);
    }
  }

  struct RawBox {
    long x1, y1, x2, y2;
    int class_id;
    std::size_t line;
  };
  std::map<std::string, std::vector<RawBox>> boxes_by_file;
  int max_class = declared.empty() ? 0 : *declared.rbegin();
  {
    Table table(ann_path, {"Filename", "Xmin", "Ymin", "Xmax", "Ymax", "ClassId"});
    std::vector<std::string> f;
    while (table.next(f)) {
      RawBox b{table.integer(f[1]), table.integer(f[2]), table.integer(f[3]),
               table.integer(f[4]), static_cast<int>(table.integer(f[5])), table.line()};
      if (b.class_id < 1) table.fail("class ids start at 1 (0 is background)");
      if (!declared.empty() && !declared.count(b.class_id)) {
        table.fail("class id " + std::to_string(b.class_id) + " not listed in classes.txt");
      }
      if (b.x1 < 0 || b.y1 < 0 || b.x1 >= b.x2 || b.y1 >= b.y2) {
        table.fail("box is empty or has negative coordinates");
      }
      max_class = std::max(max_class, b.class_id);
      boxes_by_file[f[0]].push_back(b);
    }
  }
  ds.num_classes = max_class;

  const fs::path images = root / kImagesDir;
  for (const auto& name : order) {
    const Image img = read_ppm(images / name);
    DetectionSample sample;
    sample.image_id = fs::path(name).stem().string();
    const double w = static_cast<double>(img.width);
    const double h = static_cast<double>(img.height);
    if (const auto it = boxes_by_file.find(name); it != boxes_by_file.end()) {
      for (const auto& b : it->second) {
        if (b.x2 > img.width || b.y2 > img.height) {
          throw DataError(ann_path.string() + " line " + std::to_string(b.line) +
                          ": box exceeds the " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + " image " + name);
        }
        detection::CornerBox c{b.x1 / w, b.y1 / h, b.x2 / w, b.y2 / h};
        sample.boxes.push_back({b.class_id, detection::to_center(c)});
      }
    }
    sample.source_width = img.width;
    sample.source_height = img.height;
    sample.image = resize(img, input_size, input_size);
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

DetectionSample augment_scene(const DetectionSample& sample, std::uint64_t seed,
                              const SceneAugmentRanges& ranges) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const bool flip = uniform(0.0, 1.0) < ranges.flip_probability;
  double scale = uniform(ranges.min_scale, ranges.max_scale);
  const double u_x = uniform(0.0, 1.0);
  const double u_y = uniform(0.0, 1.0);
  AugmentParams params;
  params.brightness = uniform(-ranges.max_brightness, ranges.max_brightness);
  params.contrast = uniform(ranges.min_contrast, ranges.max_contrast);

  DetectionSample out = sample;
  std::vector<detection::CornerBox> corners;
  for (const auto& gt : sample.boxes) {
    auto c = detection::to_corner(gt.box);
    if (flip) c = {1.0 - c.xmax, c.ymin, 1.0 - c.xmin, c.ymax};
    corners.push_back(c);
  }
  if (flip) {
    const Image& src = sample.image;
    for (Index c = 0; c < src.channels; ++c)
      for (Index y = 0; y < src.height; ++y)
        for (Index x = 0; x < src.width; ++x) out.image.at(c, y, x) = src.at(c, y, src.width - 1 - x);
  }

  // Extent of all boxes; an empty scene constrains nothing.
  double lo_x = 0.5, hi_x = 0.5, lo_y = 0.5, hi_y = 0.5;
  if (!corners.empty()) {
    lo_x = hi_x = corners[0].xmin;
    lo_y = hi_y = corners[0].ymin;
    for (const auto& c : corners) {
      lo_x = std::min(lo_x, c.xmin);
      hi_x = std::max(hi_x, c.xmax);
      lo_y = std::min(lo_y, c.ymin);
      hi_y = std::max(hi_y, c.ymax);
    }
  }
  // A normalized coordinate v maps to 0.5 + scale * (v - 0.5) + t; the shift
  // range keeps every box inside [0, 1].
  auto shift_range = [&](double lo, double hi, double s) {
    const double a = std::max(-0.5 - s * (lo - 0.5), -ranges.max_translate);
    const double b = std::min(0.5 - s * (hi - 0.5), ranges.max_translate);
    return std::pair{a, b};
  };
  auto [ax, bx] = shift_range(lo_x, hi_x, scale);
  auto [ay, by] = shift_range(lo_y, hi_y, scale);
  if (ax > bx || ay > by) {
    scale = 1.0;
    std::tie(ax, bx) = shift_range(lo_x, hi_x, scale);
    std::tie(ay, by) = shift_range(lo_y, hi_y, scale);
  }
  params.scale = scale;
  params.translate_x = ax + u_x * (bx - ax);
  params.translate_y = ay + u_y * (by - ay);
  out.image = apply_augment(out.image, params);

  auto map_x = [&](double v) { return std::clamp(0.5 + scale * (v - 0.5) + params.translate_x, 0.0, 1.0); };
  auto map_y = [&](double v) { return std::clamp(0.5 + scale * (v - 0.5) + params.translate_y, 0.0, 1.0); };
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const auto& c = corners[i];
    out.boxes[i].box = detection::to_center({map_x(c.xmin), map_y(c.ymin), map_x(c.xmax), map_y(c.ymax)});
  }
  return out;
}

void resize_dataset(DetectionDataset& dataset, Index size) {
  for (auto& s : dataset.samples) s.image = resize(s.image, size, size);
}

void write_detection_dataset(const DetectionDataset& dataset, const fs::path& root,
                             std::size_t train_count) {
  fs::create_directories(root / kImagesDir);
  std::ofstream ann(root / kAnnotationsFile);
  std::ofstream split(root / kSplitFile);
  if (!ann || !split) throw DataError("cannot write dataset files under " + root.string());
  ann << "Filename;Xmin;Ymin;Xmax;Ymax;ClassId\n";
  split << "Filename;Split\n";
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    const std::string name = s.image_id + ".ppm";
    write_ppm(s.image, root / kImagesDir / name);
    split << name << ';' << (i < train_count ? "train" : "test") << '\n';
    const double w = static_cast<double>(s.image.width);
    const double h = static_cast<double>(s.image.height);
    for (const auto& gt : s.boxes) {
      const auto c = detection::to_corner(gt.box);
      ann << name << ';' << std::lround(c.xmin * w) << ';' << std::lround(c.ymin * h) << ';'
          << std::lround(c.xmax * w) << ';' << std::lround(c.ymax * h) << ';' << gt.class_id
          << '\n';
    }
  }
  if (!dataset.superclass.empty()) {
    std::ofstream classes(root / kClassesFile);
    classes << "ClassId;Superclass\n";
    for (const auto& [id, name] : dataset.superclass) classes << id << ';' << name << '\n';
  }
  if (!ann || !split) throw DataError("short write under " + root.string());
}

}  // namespace mdn::data
