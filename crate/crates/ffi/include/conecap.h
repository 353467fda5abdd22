#ifndef CONECAP_H
#define CONECAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status returned by every fallible entry point.
typedef enum ConecapStatus {
  CONECAP_STATUS_OK = 0,
  CONECAP_STATUS_NULL_POINTER = 1,
  CONECAP_STATUS_INVALID_ARGUMENT = 2,
  CONECAP_STATUS_INVALID_MODEL = 3,
  CONECAP_STATUS_OUT_OF_DOMAIN = 4,
  CONECAP_STATUS_SOLVER_STALL = 5,
  CONECAP_STATUS_EXTRAPOLATION_UNRELIABLE = 6,
  CONECAP_STATUS_INVALID_CONFIG = 7,
  CONECAP_STATUS_IO = 8,
  // Numerical diagnostics or an unusable level set or surface.
  CONECAP_STATUS_NUMERICAL = 9,
  CONECAP_STATUS_INTERNAL = 10,
  CONECAP_STATUS_PANIC = 11,
} ConecapStatus;

// Warp profile of one end: `Cone` is `slope·ρ`, `Offset` is
// `slope·ρ + param`, `Smoothed` is `slope·sqrt(ρ² + param²)`.
typedef enum ConecapWarp {
  CONECAP_WARP_CONE = 0,
  CONECAP_WARP_OFFSET = 1,
  CONECAP_WARP_SMOOTHED = 2,
} ConecapWarp;

typedef enum ConecapDomainKind {
  // `{ρ ≤ a}`.
  CONECAP_DOMAIN_KIND_COORDINATE = 0,
  // Axial semi-axis `a`, equatorial semi-axis `b`.
  CONECAP_DOMAIN_KIND_ELLIPSOID = 1,
  // `ρ ≤ a (1 + b cos(mode θ))`.
  CONECAP_DOMAIN_KIND_HARMONIC = 2,
} ConecapDomainKind;

// Opaque discrete potential handle.
typedef struct ConecapField ConecapField;

// Opaque model handle.
typedef struct ConecapModel ConecapModel;

typedef struct ConecapEnd {
  enum ConecapWarp warp;
  double slope;
  double param;
  // Radius of the round link sphere.
  double link_scale;
} ConecapEnd;

typedef struct ConecapDomain {
  enum ConecapDomainKind kind;
  double a;
  double b;
  uint32_t mode;
} ConecapDomain;

typedef struct ConecapGrid {
  double outer_radius;
  uintptr_t radial_cells;
  uintptr_t angular_cells;
} ConecapGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *conecap_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *conecap_version(void);

// Builds a model with `n_ends` (1 or 2) ends.
//
// # Safety
// `ends` must point to `n_ends` values and `out` to writable storage.
enum ConecapStatus conecap_model_new(uint32_t dimension,
                                     const struct ConecapEnd *ends,
                                     uintptr_t n_ends,
                                     struct ConecapModel **out);

// # Safety
// `model` must be null or a handle from `conecap_model_new` not yet freed.
void conecap_model_free(struct ConecapModel *model);

// Asymptotic volume ratio summed over the ends.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum ConecapStatus conecap_model_avr(const struct ConecapModel *model, double *out);

// Normalized p-capacity of `{ρ ≤ rho0}` on one end, and the asymptotic
// constant γ, from the radial oracle. Either output may be null.
//
// # Safety
// `model` must be a live handle; non-null outputs must be writable.
enum ConecapStatus conecap_radial_capacity(const struct ConecapModel *model,
                                           uint32_t end,
                                           double rho0,
                                           double p,
                                           double *capacity,
                                           double *gamma);

// Radial potential of `{ρ ≤ rho0}` evaluated at `rho`.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum ConecapStatus conecap_radial_potential(const struct ConecapModel *model,
                                            uint32_t end,
                                            double rho0,
                                            double p,
                                            double rho,
                                            double *out);

// Solves the p-capacitary problem of `domain` on one end with default
// solver settings.
//
// # Safety
// `model` must be a live handle, `domain` and `grid` valid, `out` writable.
enum ConecapStatus conecap_solve(const struct ConecapModel *model,
                                 uint32_t end,
                                 const struct ConecapDomain *domain,
                                 const struct ConecapGrid *grid,
                                 double p,
                                 struct ConecapField **out);

// # Safety
// `field` must be null or a handle from `conecap_solve` not yet freed.
void conecap_field_free(struct ConecapField *field);

// Normalized capacity of a solved field from its boundary flux.
//
// # Safety
// `field` must be a live handle and `out` writable.
enum ConecapStatus conecap_field_capacity(const struct ConecapField *field, double *out);

// Number of grid nodes; rows of `angular_cells + 1` nodes, `θ` fastest.
//
// # Safety
// `field` must be a live handle.
uintptr_t conecap_field_node_count(const struct ConecapField *field);

// Copies nodal radii and potential values. Either buffer may be null;
// non-null buffers need `len ≥ conecap_field_node_count(field)`.
//
// # Safety
// `field` must be a live handle and each non-null buffer hold `len` values.
enum ConecapStatus conecap_field_values(const struct ConecapField *field,
                                        double *rho,
                                        double *u,
                                        uintptr_t len);

// Checks a TOML configuration; issues go to the last error message.
//
// # Safety
// `config_toml` must be a NUL-terminated string.
enum ConecapStatus conecap_validate_config(const char *config_toml);

// Runs a preset and writes its outputs under `out_root`. `passed`
// receives 1 when every acceptance check passed, else 0.
//
// # Safety
// String arguments must be NUL-terminated; `passed` may be null.
enum ConecapStatus conecap_run_preset(const char *preset,
                                      const char *config_toml,
                                      const char *out_root,
                                      int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONECAP_H */
