#ifndef NEMATIC_H
#define NEMATIC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NematicStatus {
  NEMATIC_STATUS_OK = 0,
  NEMATIC_STATUS_NULL_POINTER = 1,
  NEMATIC_STATUS_INVALID_ARGUMENT = 2,
  NEMATIC_STATUS_INVALID_CONFIG = 3,
  NEMATIC_STATUS_IO = 4,
  NEMATIC_STATUS_NO_CONVERGENCE = 5,
  NEMATIC_STATUS_CERTIFICATION_FAILED = 6,
  NEMATIC_STATUS_PANIC = 7,
} NematicStatus;

/**
 * Parsed and validated run configuration.
 */
typedef struct NematicConfig NematicConfig;

/**
 * Unit director field on a grid.
 */
typedef struct NematicDirector NematicDirector;

/**
 * Stored run: field samples plus per-step records.
 */
typedef struct NematicTrajectory NematicTrajectory;

typedef struct NematicEnergy {
  double elastic;
  double magnetic;
  double dxq_norm;
  double el_residual;
} NematicEnergy;

typedef struct NematicRecord {
  double time;
  double elastic;
  double magnetic;
  double kinetic;
  double dissipation;
  double dxq_norm;
  double sym_grad_norm;
} NematicRecord;

typedef struct NematicCertificate {
  double min_margin;
  double c;
  double k;
  double theta_coefficient;
  size_t samples;
  bool passes;
} NematicCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *nematic_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated,
 * always NUL-terminated when `len > 0`) and returns the full length
 * including the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t nematic_last_error(char *buf, size_t len);

/**
 * Parses `key = value` configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum NematicStatus nematic_config_parse(const char *text, struct NematicConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from [`nematic_config_parse`] not yet freed.
 */
void nematic_config_free(struct NematicConfig *cfg);

/**
 * Configured initial director on the configured grid.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be valid for writes.
 */
enum NematicStatus nematic_director_initial(const struct NematicConfig *cfg,
                                            struct NematicDirector **out);

/**
 * Director from `3·nx·ny·nz` values in x-fastest node order. Every node
 * must be unit length.
 *
 * # Safety
 * `dims` and `spacing` must point to three elements, `values` to `len`
 * doubles; `out` must be valid for writes.
 */
enum NematicStatus nematic_director_from_values(const size_t *dims,
                                                const double *spacing,
                                                bool periodic,
                                                const double *values,
                                                size_t len,
                                                struct NematicDirector **out);

/**
 * Number of grid nodes.
 *
 * # Safety
 * `d` must be a live director handle.
 */
size_t nematic_director_nodes(const struct NematicDirector *d);

/**
 * Copies the `3·nodes` components into `out`.
 *
 * # Safety
 * `d` must be a live director handle and `out` valid for `len` doubles.
 */
enum NematicStatus nematic_director_values(const struct NematicDirector *d,
                                           double *out,
                                           size_t len);

/**
 * # Safety
 * `d` must be null or a live director handle.
 */
void nematic_director_free(struct NematicDirector *d);

/**
 * Elastic and magnetic energy plus both residual norms of `d` under the
 * constants of `cfg`.
 *
 * # Safety
 * Handles must be live; `out` must be valid for writes.
 */
enum NematicStatus nematic_energy(const struct NematicConfig *cfg,
                                  const struct NematicDirector *d,
                                  struct NematicEnergy *out);

/**
 * Gradient flow from `d`, or from the configured initial director when `d`
 * is null. On `NoConvergence` the partial trajectory is still returned.
 *
 * # Safety
 * `cfg` must be live, `d` null or live, `out` valid for writes.
 */
enum NematicStatus nematic_gradflow(const struct NematicConfig *cfg,
                                    const struct NematicDirector *d,
                                    struct NematicTrajectory **out);

/**
 * Coupled run from the configured initial data; needs a periodic grid and
 * Leslie coefficients.
 *
 * # Safety
 * `cfg` must be live and `out` valid for writes.
 */
enum NematicStatus nematic_flow(const struct NematicConfig *cfg, struct NematicTrajectory **out);

/**
 * Loads a trajectory file; step records are not stored in it.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for writes.
 */
enum NematicStatus nematic_trajectory_read(const char *path, struct NematicTrajectory **out);

/**
 * Writes `trajectory.snap` and `timeseries.csv` into directory `dir`.
 *
 * # Safety
 * Handles must be live and `dir` a NUL-terminated string.
 */
enum NematicStatus nematic_trajectory_write(const struct NematicTrajectory *traj,
                                            const struct NematicConfig *cfg,
                                            const char *dir);

/**
 * # Safety
 * `traj` must be a live trajectory handle.
 */
size_t nematic_trajectory_samples(const struct NematicTrajectory *traj);

/**
 * # Safety
 * `traj` must be a live trajectory handle.
 */
size_t nematic_trajectory_records(const struct NematicTrajectory *traj);

/**
 * # Safety
 * `traj` must be a live trajectory handle.
 */
bool nematic_trajectory_converged(const struct NematicTrajectory *traj);

/**
 * Step record `index`.
 *
 * # Safety
 * `traj` must be live and `out` valid for writes.
 */
enum NematicStatus nematic_trajectory_record(const struct NematicTrajectory *traj,
                                             size_t index,
                                             struct NematicRecord *out);

/**
 * Director of the last sample as a new handle.
 *
 * # Safety
 * `traj` must be live and `out` valid for writes.
 */
enum NematicStatus nematic_trajectory_final_director(const struct NematicTrajectory *traj,
                                                     struct NematicDirector **out);

/**
 * # Safety
 * `traj` must be null or a live trajectory handle.
 */
void nematic_trajectory_free(struct NematicTrajectory *traj);

/**
 * Relative energy inequality of `traj` against the configured pair with the
 * configured constants. Returns `CertificationFailed` (with `out` filled)
 * when the minimum margin is below `−diag.tol`.
 *
 * # Safety
 * Handles must be live; `out` must be valid for writes.
 */
enum NematicStatus nematic_certify(const struct NematicConfig *cfg,
                                   const struct NematicTrajectory *traj,
                                   struct NematicCertificate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEMATIC_H */
