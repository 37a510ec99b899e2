#ifndef ONEFORM_LAB_H
#define ONEFORM_LAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum OflStatus {
  OFL_STATUS_OK = 0,
  OFL_STATUS_NULL_POINTER = 1,
  OFL_STATUS_INVALID_UTF8 = 2,
  // Malformed or out-of-range configuration or argument.
  OFL_STATUS_CONFIG = 3,
  // A numerical operation failed (caustic, degenerate composition, …).
  OFL_STATUS_COMPUTE = 4,
  OFL_STATUS_IO = 5,
  OFL_STATUS_PANIC = 6,
} OflStatus;

typedef enum OflScenario {
  OFL_SCENARIO_CURVATURE = 0,
  OFL_SCENARIO_LOOP = 1,
  OFL_SCENARIO_PATHS = 2,
  OFL_SCENARIO_KERNEL = 3,
  OFL_SCENARIO_CLOSURE = 4,
  OFL_SCENARIO_FULL_SUITE = 5,
} OflScenario;

// Scenario configuration.
typedef struct OflConfig OflConfig;

// Multi-time Hamiltonian hierarchy with two time directions.
typedef struct OflHierarchy OflHierarchy;

// Outcome of a scenario run.
typedef struct OflReport OflReport;

// Harmonic-oscillator kernel `A exp((i/ħ)(a x″² + 2b x″x′ + c x′²))`.
typedef struct OflKernel {
  double a_re;
  double a_im;
  double b_re;
  double b_im;
  double c_re;
  double c_im;
  double amplitude_re;
  double amplitude_im;
  int64_t phase_index;
} OflKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on the calling thread, or
// null after a successful call. Valid until the next `ofl_*` call on the
// same thread.
const char *ofl_last_error(void);

// Library version as a static NUL-terminated string.
const char *ofl_version(void);

// Default configuration for `scenario`.
//
// # Safety
// `out` must be valid for a pointer write.
enum OflStatus ofl_config_new(enum OflScenario scenario, struct OflConfig **out);

// Configuration from TOML (`is_json == 0`) or JSON text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` valid for a pointer write.
enum OflStatus ofl_config_parse(const char *text, int32_t is_json, struct OflConfig **out);

// Configuration from a `.toml` or `.json` file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid for a pointer write.
enum OflStatus ofl_config_load(const char *path, struct OflConfig **out);

// # Safety
// `cfg` must be a live configuration handle.
enum OflStatus ofl_config_set_scenario(struct OflConfig *cfg, enum OflScenario scenario);

// # Safety
// `cfg` must be a live configuration handle.
enum OflStatus ofl_config_set_seed(struct OflConfig *cfg, uint64_t seed);

// Sets `ħ` for both the operator hierarchies and the 1-form kernels.
//
// # Safety
// `cfg` must be a live configuration handle.
enum OflStatus ofl_config_set_hbar(struct OflConfig *cfg, double hbar);

// Effective configuration serialized as JSON. Release with
// [`ofl_string_destroy`].
//
// # Safety
// `cfg` must be a live configuration handle; `out` valid for a pointer write.
enum OflStatus ofl_config_to_json(const struct OflConfig *cfg, char **out);

// # Safety
// `cfg` must be null or a handle not yet destroyed.
void ofl_config_destroy(struct OflConfig *cfg);

// Validates `cfg` and runs its scenario. Assertion failures are not an
// error: inspect them with [`ofl_report_pass`].
//
// # Safety
// `cfg` must be a live configuration handle; `out` valid for a pointer write.
enum OflStatus ofl_run(const struct OflConfig *cfg, struct OflReport **out);

// # Safety
// `report` must be a live report handle; `out` valid for a write.
enum OflStatus ofl_report_pass(const struct OflReport *report, bool *out);

// # Safety
// `report` must be a live report handle; `total` and `failed` valid for writes.
enum OflStatus ofl_report_counts(const struct OflReport *report, uint64_t *total, uint64_t *failed);

// Report serialized as JSON (the `report.json` contents). Release with
// [`ofl_string_destroy`].
//
// # Safety
// `report` must be a live report handle; `out` valid for a pointer write.
enum OflStatus ofl_report_to_json(const struct OflReport *report, char **out);

// Writes `report.json` and the CSV tables into `dir`, creating it.
//
// # Safety
// `report` must be a live report handle; `dir` a NUL-terminated string.
enum OflStatus ofl_report_write(const struct OflReport *report, const char *dir);

// # Safety
// `report` must be null or a handle not yet destroyed.
void ofl_report_destroy(struct OflReport *report);

// # Safety
// `s` must be null or a string returned by this library, not yet destroyed.
void ofl_string_destroy(char *s);

// Free hierarchy `H₁ = p`, `H₂ = p²/2` on a `dim`-point balanced grid.
//
// # Safety
// `out` must be valid for a pointer write.
enum OflStatus ofl_hierarchy_new_free(size_t dim, struct OflHierarchy **out);

// Oscillator pair `H_j = p²/2 + ω_j² q²/2` in a truncated number basis.
//
// # Safety
// `out` must be valid for a pointer write.
enum OflStatus ofl_hierarchy_new_oscillator_pair(size_t dim,
                                                 double omega1,
                                                 double omega2,
                                                 double hbar,
                                                 struct OflHierarchy **out);

// Frobenius norm of the zero-curvature residual `Z₁₂` at `(t1, t2)`.
//
// # Safety
// `h` must be a live hierarchy handle; `out` valid for a write.
enum OflStatus ofl_hierarchy_curvature(const struct OflHierarchy *h,
                                       double t1,
                                       double t2,
                                       double *out);

// `‖U_loop − I‖_F` around the rectangle with corner `(t1, t2)` and sides
// `(side1, side2)`, integrated with `steps_per_unit` steps per unit time.
//
// # Safety
// `h` must be a live hierarchy handle; `out` valid for a write.
enum OflStatus ofl_hierarchy_loop_residual(const struct OflHierarchy *h,
                                           double t1,
                                           double t2,
                                           double side1,
                                           double side2,
                                           size_t steps_per_unit,
                                           double *out);

// # Safety
// `h` must be null or a handle not yet destroyed.
void ofl_hierarchy_destroy(struct OflHierarchy *h);

// Number of monotone staircase paths from the origin to `(steps, …, steps)`
// with `n_times` axes.
//
// # Safety
// `out` must be valid for a write.
enum OflStatus ofl_count_paths(size_t n_times, uint32_t steps, uint64_t *out);

// Exact harmonic-oscillator kernel for one degree of freedom.
//
// # Safety
// `out` must be valid for a write.
enum OflStatus ofl_ho_kernel(double omega, double duration, double hbar, struct OflKernel *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ONEFORM_LAB_H */
