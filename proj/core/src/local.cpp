#include "etkpf/local.hpp"

#include <cmath>

#include "etkpf/parallel.hpp"
#include "etkpf/rng.hpp"
#include "etkpf/sampling.hpp"

namespace etkpf {

void GridSpec::validate() const {
  if (n_fine <= 0) throw Error("[local] grid: n_fine must be positive");
  if (coarse_stride < 1) throw Error("[local] grid: coarse_stride must be >= 1");
  if (n_fine % coarse_stride != 0)
    throw Error("[local] grid: fine grid size " + std::to_string(n_fine) +
                " not divisible by stride " + std::to_string(coarse_stride));
}

double GridSpec::distance(double a, double b) const {
  const double n = static_cast<double>(n_fine);
  double diff = std::fmod(std::abs(a - b), n);
  return std::min(diff, n - diff);
}

void LocalizationSpec::validate() const {
  if (!(radius > 0.0)) throw Error("[local] localization: radius must be positive");
}

double taper_factor(double dist, const LocalizationSpec& spec) {
  if (dist < 0.0) throw Error("[local] taper_factor: negative distance");
  if (std::isinf(spec.radius)) return 1.0;
  const double z = dist / spec.radius;
  if (z >= 2.0) return 0.0;
  if (z <= 1.0) {
    return ((((-0.25 * z + 0.5) * z + 0.625) * z - 5.0 / 3.0) * z * z) + 1.0;
  }
  return ((((z / 12.0 - 0.5) * z + 0.625) * z + 5.0 / 3.0) * z - 5.0) * z + 4.0 -
         (2.0 / 3.0) / z;
}

LocalSelection select_local_obs(double site, const ObsField& obs, const GridSpec& grid,
                                const LocalizationSpec& spec) {
  const int d = obs.batch.count();
  if (static_cast<int>(obs.sites.size()) != d)
    throw Error("[local] select_local_obs: obs coordinate count mismatch");

  LocalSelection sel;
  std::vector<double> factors;
  for (int i = 0; i < d; ++i) {
    const double f = taper_factor(grid.distance(site, obs.sites[i]), spec);
    if (f > 0.0) {
      sel.obs_indices.push_back(i);
      factors.push_back(f);
    }
  }
  const int m = static_cast<int>(sel.obs_indices.size());
  sel.taper = Eigen::Map<const Vector>(factors.data(), m);
  if (m == 0) return sel;

  Vector y(m), r(m);
  Matrix eq(m, obs.batch.members());
  for (int i = 0; i < m; ++i) {
    const int src = sel.obs_indices[i];
    y(i) = obs.batch.y(src);
    r(i) = obs.batch.r_diag(src);
    eq.row(i) = obs.batch.equivalents.row(src);
  }
  sel.batch = ObsBatch(std::move(y), std::move(r), std::move(eq));
  return sel;
}

LocalAnalysis local_analysis_field(const Ensemble& ens, const ObsField& obs,
                                   const GridSpec& grid, const LocalizationSpec& spec,
                                   const GammaPolicy& policy, AnalysisVariant variant,
                                   std::uint64_t seed, int threads) {
  grid.validate();
  spec.validate();
  if (ens.dim() != grid.n_fine)
    throw Error("[local] local_analysis_field: ensemble rows != grid sites");

  const int k = ens.size();
  const int nc = grid.n_coarse();
  const std::uint64_t resample_seed = derive_seed(seed, 0x72657361u);  // same at every site
  const std::uint64_t noise_seed = derive_seed(seed, 0x65707331u);

  // One shared noise matrix for the stochastic variant; drawn once so all
  // sites perturb with the same E.
  Matrix shared_e;
  if (variant == AnalysisVariant::stochastic) {
    Rng rng(noise_seed);
    shared_e.resize(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) shared_e(i, j) = rng.normal();
  }

  std::vector<Matrix> w_coarse(nc);
  std::vector<double> gamma_coarse(nc), ess_coarse(nc);
  std::vector<std::vector<int>> resample_coarse(nc);

  parallel_for(nc, threads, [&](int ci) {
    try {
      const double site = static_cast<double>(ci * grid.coarse_stride);
      const LocalSelection sel = select_local_obs(site, obs, grid, spec);
      const SpectralCache cache = build_cache(ens, sel.batch, sel.taper);

      const double g = choose_gamma(cache, policy, resample_seed);
      const Vector alpha = pf_weights(cache, g);
      const ResamplePlan plan =
          permute_for_continuity(balanced_resample(alpha, k, resample_seed));

      WeightSet ws;
      ws.gamma = g;
      ws.resample = plan.indices;
      ws.w_mu = weight_mean_matrix(cache, g);
      const Matrix p_tilde = analysis_cov_es(cache, g);
      ws.w_eps = variant == AnalysisVariant::stochastic
                     ? stochastic_perturbations(p_tilde, shared_e)
                     : deterministic_perturbations(ws.w_mu, ws.resample, p_tilde);

      w_coarse[ci] = ws.assemble();
      gamma_coarse[ci] = g;
      ess_coarse[ci] = ess(alpha);
      resample_coarse[ci] = plan.indices;
    } catch (const Error& e) {
      throw Error(std::string(e.what()) + " (coarse site " +
                  std::to_string(ci * grid.coarse_stride) + ")");
    }
  });

  // Interpolate W to the fine grid and apply to each site's state row.
  LocalAnalysis out;
  out.analysis.states.resize(ens.dim(), k);
  const Vector xbar = ens.mean();
  const Matrix dev = ens.deviations();

  for (int f = 0; f < grid.n_fine; ++f) {
    const double pos = static_cast<double>(f) / grid.coarse_stride;
    const int c0 = f / grid.coarse_stride;
    const double theta = pos - c0;
    if (theta == 0.0) {
      if (gamma_coarse[c0] == 0.0) {
        // Pure resample at this site: copy background values bit for bit.
        const std::vector<int>& idx = resample_coarse[c0];
        for (int j = 0; j < k; ++j) out.analysis.states(f, j) = ens.states(f, idx[j]);
        continue;
      }
      out.analysis.states.row(f) =
          (dev.row(f) * w_coarse[c0]).array() + xbar(f);
    } else {
      const int c1 = (c0 + 1) % nc;
      const Matrix w = (1.0 - theta) * w_coarse[c0] + theta * w_coarse[c1];
      out.analysis.states.row(f) = (dev.row(f) * w).array() + xbar(f);
    }
  }

  out.diag.site.resize(nc);
  out.diag.gamma = gamma_coarse;
  out.diag.ess = ess_coarse;
  for (int ci = 0; ci < nc; ++ci) out.diag.site[ci] = ci * grid.coarse_stride;
  return out;
}

}  // namespace etkpf
