#pragma once

#include <cstdint>
#include <vector>

#include "etkpf/enspace.hpp"
#include "etkpf/gamma.hpp"

namespace etkpf {

/**
 * @brief Periodic 1-D grid of analysis sites.
 *
 * Sites live at integer coordinates 0..n_fine-1 on a ring; the coarse grid
 * is every coarse_stride-th site. Both toy models are univariate rings, so
 * one scalar per member forms the state block of a site.
 */
struct GridSpec {
  int n_fine = 0;
  int coarse_stride = 1;

  void validate() const;
  int n_coarse() const { return n_fine / coarse_stride; }

  /// Ring distance honoring periodicity.
  double distance(double a, double b) const;
};

/// Taper support half-width; factors vanish at distances >= 2 * radius.
struct LocalizationSpec {
  double radius = 1.0;  ///< > 0; may be +inf to disable localization

  void validate() const;
  double cutoff() const { return 2.0 * radius; }
};

/// Observations with their site coordinates, as needed for selection.
struct ObsField {
  ObsBatch batch;
  std::vector<double> sites;  ///< coordinate of each observation
};

/// Gaspari-Cohn fifth-order compactly supported correlation function:
/// 1 at distance 0, 0 at and beyond 2 * radius, monotone in between.
double taper_factor(double dist, const LocalizationSpec& spec);

/// Observations within the taper support of one site.
struct LocalSelection {
  ObsBatch batch;
  Vector taper;
  std::vector<int> obs_indices;  ///< positions in the parent batch
};

LocalSelection select_local_obs(double site, const ObsField& obs, const GridSpec& grid,
                                const LocalizationSpec& spec);

enum class AnalysisVariant { deterministic, stochastic };

/// Per-coarse-site diagnostics of one localized analysis.
struct LocalDiagnostics {
  std::vector<int> site;
  std::vector<double> gamma;
  std::vector<double> ess;
};

struct LocalAnalysis {
  Ensemble analysis;
  LocalDiagnostics diag;
};

/**
 * @brief Full localized analysis pass.
 *
 * For every coarse site: select and taper local observations, choose gamma
 * per policy, build the weight set (with the continuity permutation applied
 * to the resample) and assemble W = W^mu[:,I] + W^eps. W is then
 * interpolated entrywise (linear, periodic) to the fine sites and applied
 * to each site's state row.
 *
 * Every site derives its resampling draw from `seed` alone, and the
 * stochastic variant shares one noise matrix E across sites, so the result
 * does not depend on site ordering or worker count.
 */
LocalAnalysis local_analysis_field(const Ensemble& ens, const ObsField& obs,
                                   const GridSpec& grid, const LocalizationSpec& spec,
                                   const GammaPolicy& policy, AnalysisVariant variant,
                                   std::uint64_t seed, int threads = 1);

}  // namespace etkpf
