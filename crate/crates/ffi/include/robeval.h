#ifndef ROBEVAL_H
#define ROBEVAL_H

#include <stdbool.h>
#include <stddef.h>

typedef enum RobevalScore {
  ROBEVAL_SCORE_MSP = 0,
  ROBEVAL_SCORE_MLS = 1,
  ROBEVAL_SCORE_ENERGY = 2,
  ROBEVAL_SCORE_GEN = 3,
} RobevalScore;

typedef enum RobevalPooling {
  ROBEVAL_POOLING_POOLED = 0,
  ROBEVAL_POOLING_MACRO = 1,
} RobevalPooling;

typedef enum RobevalStatus {
  ROBEVAL_STATUS_OK = 0,
  ROBEVAL_STATUS_NULL_POINTER = 1,
  ROBEVAL_STATUS_INVALID_ARGUMENT = 2,
  ROBEVAL_STATUS_IO = 3,
  ROBEVAL_STATUS_PARSE = 4,
  ROBEVAL_STATUS_INVALID_DATA = 5,
  ROBEVAL_STATUS_EMPTY_CALIBRATION = 6,
  ROBEVAL_STATUS_NOT_FOUND = 7,
  ROBEVAL_STATUS_PANIC = 8,
} RobevalStatus;

typedef enum RobevalDataType {
  ROBEVAL_DATA_TYPE_CLEAN = 0,
  ROBEVAL_DATA_TYPE_CORRUPT = 1,
  ROBEVAL_DATA_TYPE_ADVERSARIAL = 2,
  ROBEVAL_DATA_TYPE_NOVEL = 3,
  ROBEVAL_DATA_TYPE_UNRECOGNISABLE = 4,
} RobevalDataType;

typedef enum RobevalFormat {
  ROBEVAL_FORMAT_CSV = 0,
  ROBEVAL_FORMAT_MARKDOWN = 1,
  ROBEVAL_FORMAT_JSON = 2,
} RobevalFormat;

// Opaque loaded manifest.
typedef struct RobevalManifest RobevalManifest;

// Opaque evaluation result.
typedef struct RobevalReport RobevalReport;

// Evaluation settings. `gen_top_m == 0` selects `min(C, 100)`.
typedef struct RobevalConfig {
  enum RobevalScore score;
  double accept_rate;
  enum RobevalPooling pooling;
  double gen_gamma;
  size_t gen_top_m;
  bool allow_partial;
  bool legacy;
  double legacy_tpr;
} RobevalConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *robeval_version(void);

// Message for the last failed call on this thread, or NULL. Valid until the
// next call into the library on the same thread.
const char *robeval_last_error(void);

struct RobevalConfig robeval_config_default(void);

// Loads and validates a manifest and every logit file it names.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum RobevalStatus robeval_manifest_load(const char *path, struct RobevalManifest **out);

// # Safety
// `m` must come from [`robeval_manifest_load`] and not be freed twice.
void robeval_manifest_free(struct RobevalManifest *m);

// # Safety
// `m` must be a live manifest handle; `out` must be writable.
enum RobevalStatus robeval_manifest_num_classes(const struct RobevalManifest *m, size_t *out);

// Calibrates the threshold and scores every dataset.
//
// # Safety
// `m` must be a live manifest handle, `config` readable and `out` writable.
enum RobevalStatus robeval_evaluate(const struct RobevalManifest *m,
                                    const struct RobevalConfig *config,
                                    struct RobevalReport **out);

// # Safety
// `r` must come from [`robeval_evaluate`] and not be freed twice.
void robeval_report_free(struct RobevalReport *r);

// # Safety
// `r` must be a live report handle; `out` must be writable.
enum RobevalStatus robeval_report_mean_dar(const struct RobevalReport *r, double *out);

// DAR of one data type; `NotFound` when the type was not evaluated.
//
// # Safety
// `r` must be a live report handle; `out` must be writable.
enum RobevalStatus robeval_report_type_dar(const struct RobevalReport *r,
                                           enum RobevalDataType data_type,
                                           double *out);

// # Safety
// `r` must be a live report handle; `out` must be writable.
enum RobevalStatus robeval_report_threshold(const struct RobevalReport *r, double *out);

// Renders the report; free the result with [`robeval_string_free`].
//
// # Safety
// `r` must be a live report handle; `out` must be writable.
enum RobevalStatus robeval_report_render(const struct RobevalReport *r,
                                         enum RobevalFormat format,
                                         char **out);

// # Safety
// `s` must come from this library and not be freed twice.
void robeval_string_free(char *s);

// Confidence of one logit vector. `top_m == 0` selects `min(len, 100)`.
//
// # Safety
// `logits` must point to `len` readable values; `out` must be writable.
enum RobevalStatus robeval_score(enum RobevalScore method,
                                 const double *logits,
                                 size_t len,
                                 double gen_gamma,
                                 size_t top_m,
                                 double *out);

// Threshold accepting at least `accept_rate` of `confidences`.
//
// # Safety
// `confidences` must point to `len` readable values; `out` must be writable.
enum RobevalStatus robeval_calibrate(const double *confidences,
                                     size_t len,
                                     double accept_rate,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBEVAL_H */
