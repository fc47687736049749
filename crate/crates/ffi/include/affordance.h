#ifndef AFFORDANCE_H
#define AFFORDANCE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define AFF_TOOL_BOOMERANG 0

#define AFF_TOOL_RULER 1

#define AFF_TOOL_SLINGSHOT 2

#define AFF_TOOL_SPATULA 3

#define AFF_ACTION_PUSH 0

#define AFF_ACTION_PULL 1

#define AFF_ACTION_LEFT_TO_RIGHT 2

#define AFF_ACTION_RIGHT_TO_LEFT 3

#define AFF_VARIANT_STACKED_3C1N 0

#define AFF_VARIANT_SEPARATE_3C6N 1

#define AFF_VARIANT_SEPARATE_CENTRAL_1C2N 2

#define AFF_VARIANT_SHARED_3C3N 3

#define AFF_VARIANT_SHARED_CENTRAL_1C1N 4

#define AFF_HEAD_TOOL 0

#define AFF_HEAD_TOOL_WITH_ACTION 1

#define AFF_HEAD_DUAL 2

#define AFF_HEAD_ACTION 3

#define AFF_HEAD_JOINT16 4

#define AFF_PART_TRAIN 0

#define AFF_PART_VAL 1

#define AFF_PART_TEST 2

/*
 Side length of model input images.
 */
#define AFF_INPUT_SIZE 128

/*
 Written to prediction outputs for heads the model does not have.
 */
#define AFF_NO_PREDICTION -1

/*
 Result of a fallible call.
 */
typedef enum AffStatus {
  AFF_OK = 0,
  /*
   A required pointer argument was null.
   */
  AFF_ERR_NULL = 1,
  /*
   An argument is outside its documented range.
   */
  AFF_ERR_ARGUMENT = 2,
  AFF_ERR_IO = 3,
  /*
   Malformed manifest, checkpoint or other input file.
   */
  AFF_ERR_FORMAT = 4,
  /*
   Invalid model or training configuration.
   */
  AFF_ERR_CONFIG = 5,
  /*
   Zero displacement: labels cannot be inferred.
   */
  AFF_ERR_AMBIGUOUS = 6,
  /*
   A caller-provided buffer is too small.
   */
  AFF_ERR_BUFFER = 7,
  AFF_ERR_RUNTIME = 8,
  /*
   A panic was caught at the boundary.
   */
  AFF_ERR_PANIC = 9,
} AffStatus;

/*
 Opaque dataset manifest.
 */
typedef struct AffManifest AffManifest;

/*
 Opaque model with its weights.
 */
typedef struct AffModel AffModel;

/*
 Opaque train/validation/test partition of a manifest.
 */
typedef struct AffSplit AffSplit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call into the library on the same
 thread.
 */
const char *aff_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *aff_version(void);

/*
 Joint class `tool * 4 + action` in `0..16`.

 # Safety
 `out` must be null or point to writable memory.
 */
enum AffStatus aff_encode_joint(int32_t tool_code, int32_t action_code, int32_t *out_label);

/*
 Inverse of [`aff_encode_joint`].

 # Safety
 Output pointers must be null or point to writable memory.
 */
enum AffStatus aff_decode_joint(int32_t label, int32_t *out_tool, int32_t *out_action);

/*
 Recovers (action, tool) from an object's start and end position with the
 default effect table.

 # Safety
 Output pointers must be null or point to writable memory.
 */
enum AffStatus aff_oracle_infer(double x0,
                                double y0,
                                double x1,
                                double y1,
                                int32_t *out_action,
                                int32_t *out_tool);

/*
 Renders a synthetic dataset with the default scene into `out_dir`,
 writing its manifest there.

 # Safety
 `out_dir` must be a NUL-terminated string; `out_samples` null or
 writable.
 */
enum AffStatus aff_generate_dataset(const char *out_dir,
                                    uint32_t objects,
                                    uint32_t repetitions,
                                    uint64_t seed,
                                    size_t *out_samples);

/*
 Loads a manifest JSON file.

 # Safety
 `path` must be a NUL-terminated string; `out_manifest` null or writable.
 */
enum AffStatus aff_manifest_load(const char *path, struct AffManifest **out_manifest);

/*
 Number of samples; 0 for a null handle.

 # Safety
 `manifest` must be null or a live handle.
 */
size_t aff_manifest_len(const struct AffManifest *manifest);

/*
 Key and labels of sample `index`.

 # Safety
 `manifest` must be a live handle; output pointers writable.
 */
enum AffStatus aff_manifest_sample(const struct AffManifest *manifest,
                                   size_t index,
                                   uint32_t *out_object,
                                   int32_t *out_tool,
                                   int32_t *out_action,
                                   uint32_t *out_repetition);

/*
 Checks combinations, duplicates and referenced files; stores the number
 of issues found.

 # Safety
 `manifest` must be a live handle; `out_issues` writable.
 */
enum AffStatus aff_manifest_validate(const struct AffManifest *manifest, size_t *out_issues);

/*
 # Safety
 `manifest` must be null or a handle not yet freed.
 */
void aff_manifest_free(struct AffManifest *manifest);

/*
 Repetition-wise 6/2/2 split of every (object, tool, action) group.

 # Safety
 `manifest` must be a live handle; `out_split` writable.
 */
enum AffStatus aff_split_new(const struct AffManifest *manifest,
                             uint64_t seed,
                             struct AffSplit **out_split);

/*
 Size of one part; 0 for a null handle or unknown part.

 # Safety
 `split` must be null or a live handle.
 */
size_t aff_split_len(const struct AffSplit *split, int32_t part_code);

/*
 Copies the manifest indices of one part, ascending, into `out_indices`.

 # Safety
 `split` must be a live handle and `out_indices` hold `capacity` elements.
 */
enum AffStatus aff_split_indices(const struct AffSplit *split,
                                 int32_t part_code,
                                 size_t *out_indices,
                                 size_t capacity);

/*
 # Safety
 `split` must be null or a handle not yet freed.
 */
void aff_split_free(struct AffSplit *split);

/*
 Builds a randomly initialised model with the default first block.

 # Safety
 `out_model` must be writable.
 */
enum AffStatus aff_model_new(uint32_t depth_layers,
                             int32_t variant_code,
                             int32_t head_code,
                             uint64_t seed,
                             struct AffModel **out_model);

/*
 Loads a model from a checkpoint file.

 # Safety
 `path` must be a NUL-terminated string; `out_model` writable.
 */
enum AffStatus aff_model_load(const char *path, struct AffModel **out_model);

/*
 Writes the model as a self-describing checkpoint.

 # Safety
 `model` must be a live handle; `path` a NUL-terminated string.
 */
enum AffStatus aff_model_save(const struct AffModel *model, const char *path);

/*
 Trainable parameter count; -1 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
int64_t aff_model_parameter_count(const struct AffModel *model);

/*
 Number of input tensors and channels per input the model expects.

 # Safety
 `model` must be a live handle; output pointers writable.
 */
enum AffStatus aff_model_input_layout(const struct AffModel *model,
                                      size_t *out_inputs,
                                      size_t *out_channels);

/*
 Predicts labels for `batch` samples in evaluation mode.

 `images` holds `batch × inputs × channels × side × side` normalised
 floats, sample-major, inputs in the order of [`aff_model_input_layout`].
 `actions` (length `batch`) is read only by tool-with-action models and
 may be null otherwise. Outputs have length `batch`; heads the model lacks
 yield [`AFF_NO_PREDICTION`]. A joint-16 model fills both outputs.

 # Safety
 Pointers must be valid for the lengths above; outputs may be null only
 if unwanted.
 */
enum AffStatus aff_model_predict(const struct AffModel *model,
                                 const float *images,
                                 size_t batch,
                                 size_t side,
                                 const int32_t *actions,
                                 int32_t *out_tool,
                                 int32_t *out_action);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void aff_model_free(struct AffModel *model);

/*
 Parameters of a standard encoder with a 1000-way classifier, for
 comparison with published model sizes.

 # Safety
 `out_count` must be writable.
 */
enum AffStatus aff_parity_parameter_count(uint32_t depth_layers, int64_t *out_count);

/*
 Mean and half-width `z * s / sqrt(n)` of at least two values.

 # Safety
 `values` must hold `n` doubles; outputs writable.
 */
enum AffStatus aff_confidence_interval(const double *values,
                                       size_t n,
                                       double z,
                                       double *out_mean,
                                       double *out_half_width);

/*
 Confusion matrix of `n` predictions over `classes` classes, row = true
 class. `out_counts` receives `classes²` counts row-major; `out_normalized`
 (nullable) the row-normalised values, zero rows for absent classes.

 # Safety
 `pred` and `truth` must hold `n` values; outputs `classes²`.
 */
enum AffStatus aff_confusion(const size_t *pred,
                             const size_t *truth,
                             size_t n,
                             size_t classes,
                             uint64_t *out_counts,
                             double *out_normalized);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFFORDANCE_H */
