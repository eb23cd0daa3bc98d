#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mdn/data/augment.hpp"
#include "mdn/data/image.hpp"
#include "mdn/detection/match.hpp"

namespace mdn::data {

inline constexpr Index kClassifierInput = 32;

struct ClassificationSample {
  Image image;  // 3 x 32 x 32
  int label = 0;
};

struct ClassificationDataset {
  std::vector<ClassificationSample> samples;
  Index num_classes = 0;

  std::size_t size() const { return samples.size(); }
  std::map<int, Index> class_counts() const;
};

// One row of a per-class annotation table:
//   Filename;Width;Height;Roi.X1;Roi.Y1;Roi.X2;Roi.Y2;ClassId
struct ClassificationRecord {
  std::string filename;
  Index width = 0;
  Index height = 0;
  Index x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  int class_id = 0;
};

// Parses and validates an annotation table. Errors name the file and line.
std::vector<ClassificationRecord> read_classification_table(const std::filesystem::path& csv);

// Walks root/<class>/GT-*.csv, crops each ROI and resamples it to 32 x 32.
ClassificationDataset load_classification_dataset(const std::filesystem::path& root,
                                                  Index num_classes);

// Tops classes up with augmented copies of their own images: a class with
// fewer than `low` samples is raised to `low`, one with fewer than `high` to
// `high`; larger classes are untouched.
ClassificationDataset balance_classes(const ClassificationDataset& dataset, Index low,
                                      Index high, std::uint64_t seed,
                                      const AugmentRanges& ranges = {});

struct DetectionSample {
  std::string image_id;
  Image image;  // 3 x S x S, resampled to the model input
  std::vector<detection::GroundTruthBox> boxes;  // normalized center form
  Index source_width = 0;
  Index source_height = 0;
};

struct DetectionDataset {
  std::vector<DetectionSample> samples;
  Index num_classes = 0;
  std::map<int, std::string> superclass;  // class id -> group name

  std::size_t size() const { return samples.size(); }
  std::string group_of(int class_id) const;
};

inline constexpr const char* kImagesDir = "images";
inline constexpr const char* kAnnotationsFile = "annotations.txt";
inline constexpr const char* kSplitFile = "split.txt";
inline constexpr const char* kClassesFile = "classes.txt";

// Reads the annotation table (Filename;Xmin;Ymin;Xmax;Ymax;ClassId, pixel
// edges), the split manifest (Filename;Split) and the optional
// root/classes.txt (ClassId;Superclass). Images come from root/images and are
// resampled to input_size; only images listed under `split` are loaded.
// Empty paths default to root/annotations.txt and root/split.txt.
DetectionDataset load_detection_dataset(const std::filesystem::path& root,
                                        const std::string& split, Index input_size,
                                        const std::filesystem::path& annotations = {},
                                        const std::filesystem::path& split_manifest = {});

// Ranges of the per-epoch scene augmentation used when training detectors.
struct SceneAugmentRanges {
  double flip_probability = 0.5;  // horizontal mirror
  double min_scale = 0.75;
  double max_scale = 1.25;
  double max_translate = 0.2;  // fraction of the image size
  double max_brightness = 0.15;
  double min_contrast = 0.8;
  double max_contrast = 1.2;
};

// Mirrors, zooms about the center and shifts a scene, then adjusts brightness
// and contrast. Zoom and shift are drawn so that every box stays inside the
// frame (zoom falls back to 1 when no shift can keep them all inside); boxes
// are transformed with the image.
DetectionSample augment_scene(const DetectionSample& sample, std::uint64_t seed,
                              const SceneAugmentRanges& ranges = {});

// Resamples every image to size x size; normalized boxes are unaffected.
void resize_dataset(DetectionDataset& dataset, Index size);

// Writes the layout load_detection_dataset reads. Samples before
// `train_count` go to the train split, the rest to test.
void write_detection_dataset(const DetectionDataset& dataset, const std::filesystem::path& root,
                             std::size_t train_count);

}  // namespace mdn::data
