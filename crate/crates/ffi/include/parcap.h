#ifndef PARCAP_H
#define PARCAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum ParcapStatus {
  PARCAP_STATUS_OK = 0,
  PARCAP_STATUS_NULL_POINTER = 1,
  PARCAP_STATUS_INVALID_ARGUMENT = 2,
  PARCAP_STATUS_S_OUT_OF_RANGE = 3,
  PARCAP_STATUS_SINGULARITY = 4,
  PARCAP_STATUS_QUADRATURE = 5,
  PARCAP_STATUS_NO_CONVERGENCE = 6,
  PARCAP_STATUS_NOT_APPLICABLE = 7,
  PARCAP_STATUS_UNSUPPORTED = 8,
  PARCAP_STATUS_BUFFER_TOO_SMALL = 9,
  PARCAP_STATUS_PANIC = 10,
} ParcapStatus;

// The fractional heat kernel P^s in ℝ^{n+1}.
typedef struct ParcapKernel ParcapKernel;

// 𝒫^s applied to the uniform measure on the generation-k cubes of a tree.
typedef struct ParcapOperator ParcapOperator;

// An s-parabolic Cantor construction up to generation k.
typedef struct ParcapTree ParcapTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next call into this library on the same thread.
const char *parcap_last_error(void);

// Library version as a static NUL-terminated string.
const char *parcap_version(void);

// Creates the kernel for dimension `n ≥ 1` and order `s ∈ (0, 1]`.
//
// # Safety
// `out_kernel` must be a valid pointer to writable storage for a handle.
enum ParcapStatus parcap_kernel_new(size_t n, double s, struct ParcapKernel **out_kernel);

// # Safety
// `kernel` must be NULL or a handle from [`parcap_kernel_new`] not yet freed.
void parcap_kernel_free(struct ParcapKernel *kernel);

// P^s(x, t) for `x` of length n.
//
// # Safety
// `x` must point to `n` readable doubles and `value` to writable storage.
enum ParcapStatus parcap_kernel_value(const struct ParcapKernel *kernel,
                                      const double *x,
                                      size_t n,
                                      double t,
                                      double *value);

// ∇ₓP^s(x, t) written to `grad[0..n]`.
//
// # Safety
// `x` must point to `n` readable doubles and `grad` to `grad_len` writable ones.
enum ParcapStatus parcap_kernel_grad(const struct ParcapKernel *kernel,
                                     const double *x,
                                     size_t n,
                                     double t,
                                     double *grad,
                                     size_t grad_len);

// Builds a construction. `d = 0` selects the smallest admissible branching
// digit and `tau0 ≤ 0` the default ratio bound; `lambdas` holds one ratio per
// generation, or a single ratio used for all `k` generations.
//
// # Safety
// `lambdas` must point to `lambdas_len` readable doubles and `out_tree` to
// writable storage for a handle.
enum ParcapStatus parcap_tree_new(size_t n,
                                  double s,
                                  size_t d,
                                  double tau0,
                                  const double *lambdas,
                                  size_t lambdas_len,
                                  size_t k,
                                  struct ParcapTree **out_tree);

// # Safety
// `tree` must be NULL or a handle from [`parcap_tree_new`] not yet freed.
void parcap_tree_free(struct ParcapTree *tree);

// Number of generation-`j` cubes, or 0 for a NULL handle or `j > k`.
//
// # Safety
// `tree` must be NULL or a live handle.
size_t parcap_tree_count(const struct ParcapTree *tree, size_t j);

// The growth ratio θ_j = μ(Q)/ℓ_j^{n+1} of generation-`j` cubes.
//
// # Safety
// `tree` must be a live handle and `theta` writable.
enum ParcapStatus parcap_tree_theta(const struct ParcapTree *tree, size_t j, double *theta);

// Lower corner (`n + 1` values) and side of cube `i` of generation `j`.
//
// # Safety
// `tree` must be a live handle, `corner` must hold `corner_len` doubles and
// `side` must be writable.
enum ParcapStatus parcap_tree_cube(const struct ParcapTree *tree,
                                   size_t j,
                                   size_t i,
                                   double *corner,
                                   size_t corner_len,
                                   double *side);

// μ of the box [lo, hi] ⊂ ℝ^{n+1}.
//
// # Safety
// `lo` and `hi` must each point to `len` readable doubles; `mass` writable.
enum ParcapStatus parcap_tree_mass_of_box(const struct ParcapTree *tree,
                                          const double *lo,
                                          const double *hi,
                                          size_t len,
                                          double *mass);

// σ_k = Σ_{j≤k} θ_j² and the capacity lower bound σ_k^{−1/2} for the
// generation-k set.
//
// # Safety
// `tree` must be a live handle; `sigma_out` and `bound` writable.
enum ParcapStatus parcap_tree_bound(const struct ParcapTree *tree,
                                    double *sigma_out,
                                    double *bound);

// Operator for the uniform probability on the finest cubes of `tree`, with
// Gauss order `base_order` (0: default).
//
// # Safety
// `tree` must be a live handle and `out_op` writable.
enum ParcapStatus parcap_operator_new(const struct ParcapTree *tree,
                                      size_t base_order,
                                      struct ParcapOperator **out_op);

// # Safety
// `op` must be NULL or a handle from [`parcap_operator_new`] not yet freed.
void parcap_operator_free(struct ParcapOperator *op);

// 𝒫μ(x, t) (or the conjugate field when `conjugate` is nonzero), truncated
// to |ȳ − x̄| > eps, written to `field[0..n]`.
//
// # Safety
// `x` must point to `n` readable doubles and `field` to `field_len` writable ones.
enum ParcapStatus parcap_operator_field(const struct ParcapOperator *op,
                                        const double *x,
                                        size_t n,
                                        double t,
                                        double eps,
                                        int32_t conjugate,
                                        double *field,
                                        size_t field_len);

// ‖𝒫μ‖²_{L²(μ)} and the relative cancellation |∫𝒫μ dμ| / ∫|𝒫μ| dμ.
//
// # Safety
// `op` must be a live handle; `l2_sq` and `cancellation` writable.
enum ParcapStatus parcap_operator_l2(const struct ParcapOperator *op,
                                     double *l2_sq,
                                     double *cancellation);

// Lower bound for the operator norm on L²(μ) and the capacity estimate
// 1/‖𝒫_μ‖ derived from it.
//
// # Safety
// `op` must be a live handle; `opnorm` and `gamma` writable.
enum ParcapStatus parcap_operator_gamma_aux(const struct ParcapOperator *op,
                                            double *opnorm,
                                            double *gamma);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARCAP_H */
