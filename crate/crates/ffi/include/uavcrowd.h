#ifndef UAVCROWD_H
#define UAVCROWD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UcStatus {
  UC_STATUS_OK = 0,
  UC_STATUS_INVALID_PARAMETER = 1,
  UC_STATUS_UNKNOWN_NODE = 2,
  UC_STATUS_UNREACHABLE = 3,
  UC_STATUS_CAPACITY = 4,
  UC_STATUS_INVALID_COMMAND = 5,
  UC_STATUS_INVALID_INPUT = 6,
  UC_STATUS_INVALID_SCRIPT = 7,
  UC_STATUS_INSUFFICIENT_DATA = 8,
  UC_STATUS_EXPORT = 9,
  UC_STATUS_STARTUP = 10,
  UC_STATUS_IO = 11,
  UC_STATUS_PARSE = 12,
  UC_STATUS_NULL_POINTER = 13,
  UC_STATUS_PANIC = 14,
} UcStatus;

typedef enum UcPass {
  UC_PASS_RGB = 0,
  UC_PASS_SEGMENTATION = 1,
  UC_PASS_DEPTH = 2,
} UcPass;

typedef struct UcFrame UcFrame;

typedef struct UcSim UcSim;

typedef struct UcWorld UcWorld;

// UAV position (m), velocity (m/s) and attitude (rad).
typedef struct UcPose {
  double x;
  double y;
  double z;
  double vx;
  double vy;
  double vz;
  double yaw;
  double pitch;
} UcPose;

// Borrowed view of one image pass. `data` stays valid until the frame is freed.
// Color passes hold 3 bytes per pixel; depth holds one native-endian `uint16_t` per pixel.
typedef struct UcImageInfo {
  uint32_t width;
  uint32_t height;
  uint32_t channels;
  uint32_t bytes_per_sample;
  const uint8_t *data;
  size_t len;
} UcImageInfo;

// Inclusive pixel box of one crowd group.
typedef struct UcBox {
  uint32_t x_min;
  uint32_t y_min;
  uint32_t x_max;
  uint32_t y_max;
  uint32_t component_count;
} UcBox;

typedef struct UcSplitCounts {
  size_t train;
  size_t val;
  size_t test;
} UcSplitCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread, or null. Valid until the next failing call.
const char *uc_last_error(void);

// Library version as a static nul-terminated string.
const char *uc_version(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void uc_string_free(char *s);

// Frees a byte buffer returned by this library. Null is ignored.
//
// # Safety
// `data` and `len` must be exactly as returned.
void uc_bytes_free(uint8_t *data, size_t len);

// World-space center of hex `(q, r)` for tiles of circumradius `tile_size`.
//
// # Safety
// `x` and `y` must be valid for writes.
enum UcStatus uc_hex_to_world(int32_t q, int32_t r, double tile_size, double *x, double *y);

// Generates a world with the default tile mix.
//
// # Safety
// `out` must be valid for writes. The handle must be released with `uc_world_free`.
enum UcStatus uc_world_generate(uint64_t seed,
                                int64_t radius,
                                double tile_size,
                                struct UcWorld **out);

// # Safety
// `world` must be null or a live handle.
void uc_world_free(struct UcWorld *world);

// # Safety
// `world` must be a live handle and `out` valid for writes.
enum UcStatus uc_world_tile_count(const struct UcWorld *world, size_t *out);

// World as JSON. Release the string with `uc_string_free`.
//
// # Safety
// `world` must be a live handle and `out` valid for writes.
enum UcStatus uc_world_to_json(const struct UcWorld *world, char **out);

// Session on a seeded world with `agents` randomly grouped agents.
//
// # Safety
// `out` must be valid for writes. Release with `uc_sim_free`.
enum UcStatus uc_sim_new(uint64_t seed, uint32_t radius, size_t agents, struct UcSim **out);

// # Safety
// `sim` must be null or a live handle.
void uc_sim_free(struct UcSim *sim);

// Replaces the crowd with a scenario script given as JSON.
//
// # Safety
// `sim` must be a live handle and `script_json` a nul-terminated string.
enum UcStatus uc_sim_load_scenario(struct UcSim *sim, const char *script_json);

// Advances the session by `ticks` fixed steps.
//
// # Safety
// `sim` must be a live handle.
enum UcStatus uc_sim_step(struct UcSim *sim, uint32_t ticks);

// # Safety
// `sim` must be a live handle and `out` valid for writes.
enum UcStatus uc_sim_tick(const struct UcSim *sim, uint64_t *out);

// # Safety
// `sim` must be a live handle.
enum UcStatus uc_sim_set_velocity(struct UcSim *sim, double vx, double vy, double vz);

// # Safety
// `sim` must be a live handle.
enum UcStatus uc_sim_set_altitude(struct UcSim *sim, double z);

// # Safety
// `sim` must be a live handle.
enum UcStatus uc_sim_set_pitch(struct UcSim *sim, double pitch);

// # Safety
// `sim` must be a live handle and `out` valid for writes.
enum UcStatus uc_sim_pose(const struct UcSim *sim, struct UcPose *out);

// Renders all passes of the current tick and annotates them. Release with `uc_frame_free`.
//
// # Safety
// `sim` must be a live handle and `out` valid for writes.
enum UcStatus uc_sim_capture(struct UcSim *sim, struct UcFrame **out);

// # Safety
// `frame` must be null or a live handle.
void uc_frame_free(struct UcFrame *frame);

// # Safety
// `frame` must be a live handle and `out` valid for writes.
enum UcStatus uc_frame_tick(const struct UcFrame *frame, uint64_t *out);

// Borrowed pixels of one pass.
//
// # Safety
// `frame` must be a live handle and `out` valid for writes.
enum UcStatus uc_frame_image(const struct UcFrame *frame,
                             enum UcPass pass,
                             struct UcImageInfo *out);

// One pass encoded as binary PPM (color) or PGM (depth). Release with `uc_bytes_free`.
//
// # Safety
// `frame` must be a live handle; `data` and `len` valid for writes.
enum UcStatus uc_frame_encode(const struct UcFrame *frame,
                              enum UcPass pass,
                              uint8_t **data,
                              size_t *len);

// Copies up to `capacity` group boxes into `boxes` and stores the total number in `count`.
// Pass `boxes = NULL, capacity = 0` to query the count.
//
// # Safety
// `frame` must be a live handle, `count` valid for writes and `boxes` valid for `capacity` elements.
enum UcStatus uc_frame_boxes(const struct UcFrame *frame,
                             struct UcBox *boxes,
                             size_t capacity,
                             size_t *count);

// Per-class train/val/test sizes for a balanced class of `class_size` clips.
//
// # Safety
// `out` must be valid for writes.
enum UcStatus uc_split_counts(size_t class_size, struct UcSplitCounts *out);

// Balances an inventory of `violent` and `non_violent` clips and reports the total split sizes.
//
// # Safety
// `out` must be valid for writes.
enum UcStatus uc_balance_and_split(size_t violent,
                                   size_t non_violent,
                                   uint64_t split_seed,
                                   struct UcSplitCounts *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UAVCROWD_H */
