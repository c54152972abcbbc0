#pragma once

#include "etkpf/enspace.hpp"

namespace etkpf {

/**
 * @brief Full Gaussian-mixture description of one hybrid analysis, computed
 * directly in state space.
 *
 * Reference implementation used by tests to check the ensemble-space
 * algebra; dense q x q and d x d matrices throughout, so dimensions are
 * capped at 200.
 */
struct MixtureParams {
  Matrix nu;     ///< q x k intermediate EnKF-step means nu^{gamma,i}
  Matrix q_mat;  ///< q x q covariance Q of the EnKF step
  Matrix mu;     ///< q x k component means mu^{gamma,i}
  Matrix p_a;    ///< q x q component covariance P^{a,gamma}
  Vector alpha;  ///< length-k mixing weights, nonnegative, sum 1
};

/**
 * @brief Computes the mixture analysis of the two-stage update with the
 * explicit composite-gain formulas: nu = x + K(gamma P^b)(y - Hx),
 * Q = K R K'/gamma, mu = nu + K((1-gamma) Q)(y - H nu),
 * P^a = (I - K((1-gamma) Q) H) Q and alpha from the Gaussian densities
 * phi(y; H nu_i, H Q H' + R/(1-gamma)).
 *
 * All H products are taken from the precomputed linear-equivalent columns,
 * so no observation operator matrix is ever formed. No spectral cache, no
 * rational functions: this path is independent of the production one.
 */
MixtureParams oracle_mixture(const Ensemble& ens, const ObsBatch& obs, double gamma);

}  // namespace etkpf
