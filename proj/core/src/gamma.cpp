#include "etkpf/gamma.hpp"

#include <algorithm>
#include <cmath>

#include "etkpf/sampling.hpp"

namespace etkpf {

std::vector<double> GammaPolicy::default_grid() {
  std::vector<double> g(21);
  for (int i = 0; i <= 20; ++i) g[i] = i / 20.0;
  return g;
}

void GammaPolicy::validate() const {
  if (kind == GammaKind::fixed) {
    if (fixed_value < 0.0 || fixed_value > 1.0)
      throw Error("[gamma] policy: fixed gamma outside [0,1]");
    return;
  }
  if (grid.empty()) throw Error("[gamma] policy: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw Error("[gamma] policy: grid must be ascending");
  if (grid.front() < 0.0 || grid.back() > 1.0)
    throw Error("[gamma] policy: grid values outside [0,1]");
  if (grid.back() != 1.0)
    throw Error("[gamma] policy: grid must contain 1 so the ESS bound stays satisfiable");
  if (kind == GammaKind::ess_target && (ess_fraction <= 0.0 || ess_fraction > 1.0))
    throw Error("[gamma] policy: ess_fraction outside (0,1]");
}

double choose_gamma_ess(const SpectralCache& cache, const GammaPolicy& policy) {
  if (policy.kind != GammaKind::ess_target)
    throw Error("[gamma] choose_gamma_ess: policy kind mismatch");
  policy.validate();
  const double bound = policy.ess_fraction * cache.k;
  for (const double g : policy.grid) {
    if (ess(pf_weights(cache, g)) >= bound) return g;
  }
  return policy.grid.back();  // unreachable: ESS(1) = k
}

double min_mse_objective(const SpectralCache& cache, double gamma, std::uint64_t seed) {
  const int k = cache.k;
  const Matrix w_mu = weight_mean_matrix(cache, gamma);
  const Vector alpha = pf_weights(cache, gamma);
  const ResamplePlan plan = balanced_resample(alpha, k, seed);

  // m = (1/k) W^mu W^alpha 1 = (1/k) W^mu N; permutation invariant.
  Vector counts(k);
  for (int j = 0; j < k; ++j) counts(j) = plan.multiplicities[j];
  const Vector m = (w_mu * counts) / k;

  const Vector sm = cache.spectrum.apply(cache.spectrum.eigvals) * m;  // S m
  return m.dot(sm) - 2.0 * m.dot(cache.c);
}

double choose_gamma_min_mse(const SpectralCache& cache, const GammaPolicy& policy,
                            std::uint64_t seed) {
  if (policy.kind != GammaKind::min_mse)
    throw Error("[gamma] choose_gamma_min_mse: policy kind mismatch");
  policy.validate();
  double best_gamma = policy.grid.front();
  double best = min_mse_objective(cache, best_gamma, seed);
  for (std::size_t i = 1; i < policy.grid.size(); ++i) {
    const double obj = min_mse_objective(cache, policy.grid[i], seed);
    if (obj <= best) {  // ties go to the largest gamma
      best = obj;
      best_gamma = policy.grid[i];
    }
  }
  return best_gamma;
}

double choose_gamma(const SpectralCache& cache, const GammaPolicy& policy, std::uint64_t seed) {
  switch (policy.kind) {
    case GammaKind::fixed:
      policy.validate();
      return policy.fixed_value;
    case GammaKind::ess_target:
      return choose_gamma_ess(cache, policy);
    case GammaKind::min_mse:
      return choose_gamma_min_mse(cache, policy, seed);
  }
  throw Error("[gamma] choose_gamma: unknown policy kind");
}

}  // namespace etkpf
