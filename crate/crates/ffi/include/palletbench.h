#ifndef PALLETBENCH_H
#define PALLETBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Status codes; the values are stable.
 */
typedef enum PbStatus {
  PB_STATUS_OK = 0,
  PB_STATUS_NULL_ARGUMENT = 1,
  PB_STATUS_MALFORMED_JSON = 2,
  PB_STATUS_SCHEMA = 3,
  PB_STATUS_COMPRESSED_RLE = 4,
  PB_STATUS_RLE_LENGTH_MISMATCH = 5,
  PB_STATUS_DIMENSION_MISMATCH = 6,
  PB_STATUS_SCORE_RANGE = 7,
  PB_STATUS_UNKNOWN_IMAGE = 8,
  PB_STATUS_UNKNOWN_CATEGORY = 9,
  PB_STATUS_DARKEN_RANGE = 10,
  PB_STATUS_BUFFER_TOO_SMALL = 11,
  PB_STATUS_INVALID_ARGUMENT = 12,
  PB_STATUS_INTERNAL = 99,
} PbStatus;

typedef enum PbEvalMode {
  PB_EVAL_MODE_MASK = 0,
  PB_EVAL_MODE_BBOX = 1,
} PbEvalMode;

/*
 Opaque parsed dataset.
 */
typedef struct PbDataset PbDataset;

/*
 Opaque prediction set, checked against a dataset when parsed.
 */
typedef struct PbPredictions PbPredictions;

/*
 Caller-owned view of bytes allocated by this library.
 */
typedef struct PbBuffer {
  uint8_t *data;
  size_t len;
} PbBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread; valid until the next
 call into the library from the same thread. Never null.
 */
const char *pb_last_error_message(void);

/*
 Parse COCO JSON. On success `*out` owns a new handle.

 # Safety
 `json` must point to `len` readable bytes; `out` must be writable.
 */
enum PbStatus pb_dataset_parse(const uint8_t *json, size_t len, struct PbDataset **out);

/*
 # Safety
 `d` must be null or a handle from `pb_dataset_parse` not yet freed.
 */
void pb_dataset_free(struct PbDataset *d);

/*
 Number of images, annotations and categories.

 # Safety
 `d` must be a live handle; output pointers may be null to skip them.
 */
enum PbStatus pb_dataset_counts(const struct PbDataset *d,
                                size_t *images,
                                size_t *annotations,
                                size_t *categories);

/*
 Canonical JSON serialisation into a new buffer.

 # Safety
 `d` must be a live handle; `out` must be writable.
 */
enum PbStatus pb_dataset_serialize(const struct PbDataset *d, struct PbBuffer *out);

/*
 Release a buffer returned by this library. Null data is ignored.

 # Safety
 `buf` must come from this library and not have been freed.
 */
void pb_buffer_free(struct PbBuffer buf);

/*
 Validate without touching the filesystem; `*defects` receives the count.
 The full report is available as JSON through `report` when non-null.

 # Safety
 `d` must be a live handle; `defects` must be writable.
 */
enum PbStatus pb_dataset_validate(const struct PbDataset *d,
                                  size_t *defects,
                                  struct PbBuffer *report);

/*
 Parse a COCO results array and check it against `d`.

 # Safety
 `json` must point to `len` bytes; `d` must be a live handle; `out` writable.
 */
enum PbStatus pb_predictions_parse(const uint8_t *json,
                                   size_t len,
                                   const struct PbDataset *d,
                                   struct PbPredictions **out);

/*
 # Safety
 `p` must be null or a handle from `pb_predictions_parse` not yet freed.
 */
void pb_predictions_free(struct PbPredictions *p);

/*
 Class-grouped mAP at IoU 0.5. `*map50` is NaN when no class has ground truth.

 # Safety
 Handles must be live; `map50` must be writable.
 */
enum PbStatus pb_evaluate_map50(const struct PbDataset *d,
                                const struct PbPredictions *p,
                                enum PbEvalMode mode,
                                double *map50);

/*
 Encode a row-major mask (`height * width` bytes, non-zero = set) into
 column-major RLE counts. `*count_len` receives the number of counts; if
 it exceeds `capacity`, nothing is written and `BufferTooSmall` returned.

 # Safety
 `mask` must hold `width * height` bytes; `counts` must hold `capacity`
 values (may be null when `capacity` is 0); `count_len` must be writable.
 */
enum PbStatus pb_rle_encode(const uint8_t *mask,
                            uint32_t width,
                            uint32_t height,
                            uint64_t *counts,
                            size_t capacity,
                            size_t *count_len);

/*
 Decode column-major RLE counts into a row-major 0/1 mask of
 `width * height` bytes.

 # Safety
 `counts` must hold `count_len` values; `mask` must hold `width * height` bytes.
 */
enum PbStatus pb_rle_decode(const uint64_t *counts,
                            size_t count_len,
                            uint32_t width,
                            uint32_t height,
                            uint8_t *mask);

/*
 Darken 8-bit samples in place by `percent` (0 to 100), rounding half up.

 # Safety
 `samples` must hold `len` writable bytes.
 */
enum PbStatus pb_darken(uint8_t *samples, size_t len, int32_t percent);

/*
 Element `index` of the splitmix64 stream seeded with `seed`.
 */
uint64_t pb_splitmix64_at(uint64_t seed, uint64_t index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PALLETBENCH_H */
