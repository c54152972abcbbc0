#pragma once

#include <cstdint>
#include <vector>

#include "etkpf/enspace.hpp"

namespace etkpf {

enum class GammaKind { fixed, ess_target, min_mse };

/**
 * @brief How the EnKF/PF balance parameter is chosen per analysis.
 *
 * Adaptive kinds search an ascending grid in [0,1]; the grid must contain
 * 1, where the mixture weights are uniform and the ESS bound is always
 * satisfiable.
 */
struct GammaPolicy {
  GammaKind kind = GammaKind::fixed;
  double fixed_value = 1.0;
  double ess_fraction = 0.5;
  std::vector<double> grid = default_grid();

  static std::vector<double> default_grid();  ///< 0, 0.05, ..., 1 (21 points)
  void validate() const;
};

/**
 * @brief Smallest grid gamma whose mixture weights keep
 * ess(alpha) >= ess_fraction * k.
 */
double choose_gamma_ess(const SpectralCache& cache, const GammaPolicy& policy);

/// The resampling-aware predictive objective m' S m - 2 m' c at one gamma,
/// with m = (1/k) W^mu W^alpha 1 from a balanced resample with `seed`.
/// Equals MSE(H mubar, y) - MSE(H xbar, y) in observation space.
double min_mse_objective(const SpectralCache& cache, double gamma, std::uint64_t seed);

/**
 * @brief Grid gamma minimizing the predictive mean squared error objective.
 *
 * The resample inside the search uses the same seed as the final analysis
 * resample, so the chosen gamma corresponds to the transform actually
 * applied. Ties are broken toward the largest gamma.
 */
double choose_gamma_min_mse(const SpectralCache& cache, const GammaPolicy& policy,
                            std::uint64_t seed);

/// Dispatch on policy.kind.
double choose_gamma(const SpectralCache& cache, const GammaPolicy& policy, std::uint64_t seed);

}  // namespace etkpf
