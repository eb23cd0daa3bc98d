/* C interface to the mdn library: traffic-sign classification and detection. */
#ifndef MDN_MDN_H
#define MDN_MDN_H

#include <stddef.h>
#include <stdint.h>

#if defined(MDN_BUILDING_LIBRARY)
#define MDN_API __attribute__((visibility("default")))
#else
#define MDN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as the CLI exit codes. */
typedef enum mdn_status {
  MDN_OK = 0,
  MDN_ERR_INTERNAL = 1,
  MDN_ERR_INPUT = 2,      /* bad config, arguments, data files or shapes */
  MDN_ERR_NUMERIC = 3,    /* non-finite loss during training */
  MDN_ERR_CHECKPOINT = 4  /* corrupt checkpoint or spec mismatch */
} mdn_status;

typedef struct mdn_config mdn_config;
typedef struct mdn_model mdn_model;
typedef struct mdn_dataset mdn_dataset;
typedef struct mdn_report mdn_report;
typedef struct mdn_detections mdn_detections;

/* One detection; coordinates are normalized to [0, 1]. */
typedef struct mdn_detection {
  int class_id;
  double score;
  double xmin, ymin, xmax, ymax;
} mdn_detection;

/* Called after every training epoch. `metric` is the held-out accuracy
   (classifier) or mAP (detector) when the epoch was evaluated, NaN otherwise. */
typedef void (*mdn_progress_fn)(int epoch, double train_loss, double metric, double wall_time,
                                void* user);

/* Message of the last failed call on this thread ("" if none). */
MDN_API const char* mdn_last_error(void);
MDN_API const char* mdn_version(void);

MDN_API mdn_status mdn_config_load(const char* path, mdn_config** out);
MDN_API void mdn_config_free(mdn_config* config);

/* Trains per config and writes metrics.txt, timing.txt and checkpoints to out_dir. */
MDN_API mdn_status mdn_train(const mdn_config* config, const char* out_dir,
                             mdn_progress_fn progress, void* user);

MDN_API mdn_status mdn_model_create(const mdn_config* config, mdn_model** out);
MDN_API mdn_status mdn_model_load(const char* checkpoint_dir, mdn_model** out);
MDN_API mdn_status mdn_model_save(const mdn_model* model, const char* checkpoint_dir);
/* MDN_ERR_CHECKPOINT when the model's spec differs from the config's model section. */
MDN_API mdn_status mdn_model_check_config(const mdn_model* model, const mdn_config* config);
MDN_API int mdn_model_is_detector(const mdn_model* model);
MDN_API void mdn_model_free(mdn_model* model);

/* Classifier: `path` is a tree of per-class annotation tables (split ignored).
   Detector: `path` is a dataset root; `split` selects the split manifest rows
   (NULL means "test"). */
MDN_API mdn_status mdn_dataset_open(const mdn_model* model, const char* path, const char* split,
                                    mdn_dataset** out);
/* The held-out data a config describes (its training data if it has none). */
MDN_API mdn_status mdn_dataset_from_config(const mdn_config* config, mdn_dataset** out);
MDN_API size_t mdn_dataset_size(const mdn_dataset* dataset);
MDN_API void mdn_dataset_free(mdn_dataset* dataset);

/* Accuracy for a classifier; per-class AP, mAP and per-group recall/precision
   for a detector at score threshold t. */
MDN_API mdn_status mdn_evaluate(const mdn_model* model, const mdn_dataset* dataset, double t,
                                double nms_iou, mdn_report** out);
MDN_API const char* mdn_report_text(const mdn_report* report);
/* Keys: "accuracy" (classifier), "map" (detector), "images". */
MDN_API mdn_status mdn_report_value(const mdn_report* report, const char* key, double* out);
MDN_API mdn_status mdn_report_write(const mdn_report* report, const char* path);
MDN_API void mdn_report_free(mdn_report* report);

/* Detects signs in a PPM image (resampled to the model input size). */
MDN_API mdn_status mdn_detect_file(const mdn_model* model, const char* image_path, double t,
                                   double nms_iou, mdn_detections** out);
MDN_API size_t mdn_detections_count(const mdn_detections* detections);
MDN_API mdn_status mdn_detections_get(const mdn_detections* detections, size_t index,
                                      mdn_detection* out);
/* Rows `image_id;class_id;score;xmin;ymin;xmax;ymax`; path "-" writes to stdout. */
MDN_API mdn_status mdn_detections_write(const mdn_detections* detections, const char* image_id,
                                        const char* path);
/* Copy of the source image with every detection drawn as a rectangle. */
MDN_API mdn_status mdn_render_overlay(const char* image_path, const mdn_detections* detections,
                                      const char* out_path);
MDN_API void mdn_detections_free(mdn_detections* detections);

/* Writes a synthetic detection dataset (images/, annotations.txt, split.txt,
   classes.txt); the first train_count scenes form the train split. */
MDN_API mdn_status mdn_synth_write(size_t count, uint64_t seed, int image_size,
                                   size_t train_count, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* MDN_MDN_H */
