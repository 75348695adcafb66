#ifndef Z2SYNC_H
#define Z2SYNC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum Z2Status {
  Z2_STATUS_OK = 0,
  Z2_STATUS_NULL_POINTER = 1,
  Z2_STATUS_INVALID_PARAMETER = 2,
  Z2_STATUS_DOMAIN = 3,
  Z2_STATUS_GEOMETRY = 4,
  Z2_STATUS_TOO_LARGE = 5,
  Z2_STATUS_NOT_FOUND = 6,
  Z2_STATUS_FORMAT = 7,
  Z2_STATUS_IO = 8,
  Z2_STATUS_BUFFER_TOO_SMALL = 9,
  Z2_STATUS_PANIC = 10,
} Z2Status;

// Planted signs, observations and Gaussian side information.
typedef struct Z2Instance Z2Instance;

// Outcome of a pipeline run with the per-vertex sign estimates.
typedef struct Z2SyncResult Z2SyncResult;

// Model parameters. `p` must lie in `[0, 1/2]`.
typedef struct Z2Params {
  uint32_t d;
  int64_t n;
  double p;
  double eta;
  uint32_t range_l;
  uint64_t seed;
} Z2Params;

// Pipeline controls. `scale` must be a positive multiple of 6.
typedef struct Z2SyncOptions {
  int64_t scale;
  uint32_t kappa;
  double t;
  uint64_t burn_in;
  uint64_t sweeps;
  uint64_t risk_pairs;
} Z2SyncOptions;

// Scalar results of a pipeline run.
typedef struct Z2SyncSummary {
  double risk;
  double risk_se;
  double risk_exact;
  double p_hat;
  double delta_hat;
  uint64_t blocks;
  uint64_t covered;
  uint64_t edges;
  uint64_t disagreements;
} Z2SyncSummary;

// Scale-condition values with their truncation tails.
typedef struct Z2ScaleReport {
  double a1;
  double a2;
  double a2_tail;
  double a3;
  double a3_tail;
  bool all_pass;
} Z2ScaleReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length in bytes.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t z2_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *z2_version(void);

// Lattice inverse temperature `1/2 ln((1 - p) / p)` for `0 < p < 1/2`.
//
// # Safety
// `out` must be null or valid for a write.
enum Z2Status z2_beta_of(double p, double *out);

// Draw an instance.
//
// # Safety
// `params` must be null or valid for a read; `out` null or valid for a write.
enum Z2Status z2_instance_generate(const struct Z2Params *params, struct Z2Instance **out);

// Release an instance. Null is ignored.
//
// # Safety
// `inst` must be null or a handle from this library not yet freed.
void z2_instance_free(struct Z2Instance *inst);

// Number of lattice vertices, 0 for a null handle.
//
// # Safety
// `inst` must be null or a live handle.
size_t z2_instance_num_vertices(const struct Z2Instance *inst);

// Copy the planted signs (row-major over the box) into `out`.
//
// # Safety
// `inst` must be null or a live handle; `out` null or valid for `len` writes.
enum Z2Status z2_instance_theta(const struct Z2Instance *inst, int8_t *out, size_t len);

// Write an instance in the binary instance format.
//
// # Safety
// `inst` must be null or a live handle; `path` null or a NUL-terminated string.
enum Z2Status z2_instance_save(const struct Z2Instance *inst, const char *path);

// Read an instance written by [`z2_instance_save`] or the command line tool.
//
// # Safety
// `path` must be null or a NUL-terminated string; `out` null or valid for a write.
enum Z2Status z2_instance_load(const char *path, struct Z2Instance **out);

// Run the full pipeline on the instance described by `params`. The
// Gaussian range is set to twice the block scale.
//
// # Safety
// `params` and `opts` must be null or valid for reads; `out` null or valid for a write.
enum Z2Status z2_sync_run(const struct Z2Params *params,
                          const struct Z2SyncOptions *opts,
                          struct Z2SyncResult **out);

// Release a pipeline result. Null is ignored.
//
// # Safety
// `res` must be null or a handle from this library not yet freed.
void z2_sync_result_free(struct Z2SyncResult *res);

// Scalar results of a run.
//
// # Safety
// `res` must be null or a live handle; `out` null or valid for a write.
enum Z2Status z2_sync_result_summary(const struct Z2SyncResult *res, struct Z2SyncSummary *out);

// Copy the covered vertex indices and their estimated signs. Both buffers
// need `summary.covered` entries.
//
// # Safety
// `res` must be null or a live handle; each buffer null or valid for `len` writes.
enum Z2Status z2_sync_result_signs(const struct Z2SyncResult *res,
                                   uint64_t *vertices,
                                   int8_t *signs,
                                   size_t len);

// Evaluate the block-size conditions for `kappa` in dimension `d`.
//
// # Safety
// `out` must be null or valid for a write.
enum Z2Status z2_check_scales(uint32_t kappa, uint32_t d, struct Z2ScaleReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* Z2SYNC_H */
