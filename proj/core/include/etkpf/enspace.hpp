#pragma once

#include <vector>

#include "etkpf/linalg.hpp"

namespace etkpf {

/**
 * @brief Background or analysis ensemble, one member per column.
 *
 * The mean / deviation split x = xbar 1' + X is recomputed on demand; all
 * analysis algebra acts on the deviations, so members never need to be
 * recentred in place.
 */
struct Ensemble {
  Matrix states;  ///< q x k, column i is member i

  Ensemble() = default;
  explicit Ensemble(Matrix s);

  int dim() const { return static_cast<int>(states.rows()); }
  int size() const { return static_cast<int>(states.cols()); }

  Vector mean() const { return states.rowwise().mean(); }
  Matrix deviations() const { return states.colwise() - states.rowwise().mean().eval(); }
};

/**
 * @brief One batch of observations with diagonal error covariance.
 *
 * The observation operator is never materialized: `equivalents` holds the
 * per-member model equivalents H(x^i), which is all the analysis needs and
 * permits nonlinear operators. An empty batch (d = 0) is legal and yields
 * an identity analysis.
 */
struct ObsBatch {
  Vector y;            ///< length d
  Vector r_diag;       ///< length d, strictly positive variances
  Matrix equivalents;  ///< d x k

  ObsBatch() = default;
  ObsBatch(Vector y_in, Vector r_in, Matrix equivalents_in);

  int count() const { return static_cast<int>(y.size()); }
  int members() const { return static_cast<int>(equivalents.cols()); }
};

/**
 * @brief Sufficient statistics of one local analysis.
 *
 * Holds the eigen-pair of S = (HX)' R^-1 (HX) (taper applied to R^-1) and
 * the innovation vector c = (HX)' R^-1 (y - H xbar). Eigenvalues below
 * 1e-12 of the largest are clipped to exactly zero so the rational weight
 * functions see the analytic null space (1 is always a null vector of S).
 */
struct SpectralCache {
  SymmetricSpectrum spectrum;
  Vector c;
  int k = 0;
};

/**
 * @brief The k x k transform pieces of one analysis.
 *
 * resample holds the index vector I (member i copies component I[i]); the
 * 0/1 matrix W^alpha is never built, column gathering replaces the product.
 */
struct WeightSet {
  Matrix w_mu;                ///< k x k mean-update weights, columns sum to 1
  std::vector<int> resample;  ///< length k, entries in [0, k)
  Matrix w_eps;               ///< k x k perturbation weights, W^eps 1 = 0
  double gamma = 1.0;

  /// Full transform W = W^mu W^alpha + W^eps (column gather form).
  Matrix assemble() const;
};

/// S and c of the ensemble-space analysis, with per-observation taper
/// factors in [0,1] scaling R^-1. A zero-length batch gives S = 0, c = 0.
SpectralCache build_cache(const Ensemble& ens, const ObsBatch& obs, const Vector& taper);

/// Untapered convenience overload.
SpectralCache build_cache(const Ensemble& ens, const ObsBatch& obs);

// Rational spectral weight functions of the hybrid analysis. All take an
// eigenvalue lambda >= 0, the EnKF/PF balance gamma in [0,1] and the
// ensemble size k >= 2; denominators are bounded below by (k-1)^2.
double f_mu(double lambda, double gamma, int k);
double f_mubar(double lambda, double gamma, int k);
double f_gamma(double lambda, double gamma, int k);
double f_alpha(double lambda, double gamma, int k);

/**
 * @brief Mean-update weight matrix W^mu.
 *
 * W^mu = U diag(f_mu(l)) U' + U diag(f_mubar(l)) U' c 1'. Computed as
 * I + U diag(f_mu(l) - 1) U' + ..., which makes the no-information case
 * (S = 0, c = 0, or gamma = 0) an exact identity.
 */
Matrix weight_mean_matrix(const SpectralCache& cache, double gamma);

/**
 * @brief Particle-filter mixture weights alpha^gamma, a simplex vector.
 *
 * Exponents are stabilized by max subtraction before exponentiation; they
 * grow like lambda (k-1)^2 and would overflow otherwise.
 */
Vector pf_weights(const SpectralCache& cache, double gamma);

/// Ensemble-space analysis covariance P~ = U diag(f_gamma(l)) U'.
Matrix analysis_cov_es(const SpectralCache& cache, double gamma);

/**
 * @brief Stochastic perturbation weights W^eps = P~^{1/2} E.
 *
 * E must satisfy E 1 = 0; rows are recentred here so raw standard-normal
 * draws can be passed directly. Negative round-off eigenvalues of P~ are
 * clamped to zero before the square root.
 */
Matrix stochastic_perturbations(const Matrix& p_tilde, const Matrix& e);

/**
 * @brief Deterministic perturbation weights via the quadratic matrix
 * equation A W + W A' + W W' = (k-1) P~ with A the centred resampled mean
 * transform.
 *
 * Returns the symmetric PSD solution with W^eps 1 = 0.
 */
Matrix deterministic_perturbations(const Matrix& w_mu, const std::vector<int>& resample,
                                   const Matrix& p_tilde);

/**
 * @brief Applies a weight set: x^a = xbar 1' + X (W^mu[:, I] + W^eps).
 *
 * At gamma = 0 the transform is a pure resample (W^mu = I, W^eps = 0
 * analytically) and members are copied bit for bit instead of being
 * recomposed through the mean/deviation split.
 */
Ensemble assemble_and_apply(const Ensemble& ens, const WeightSet& ws);

}  // namespace etkpf
