#pragma once

#include <string>
#include <vector>

#include "etkpf/config.hpp"
#include "etkpf/verify.hpp"

namespace etkpf {

/**
 * @brief Outcome of a cycled assimilation run.
 *
 * The archive directory holds MANIFEST, config.cfg, twin.bin, one
 * cycle_NNNNN.bin block file per cycle (background/analysis ensembles,
 * means, spreads, gamma and ESS fields), gamma_ess.csv and scores.csv.
 */
struct CycledResult {
  ScoreTable scores;
  Climatology climatology;
  std::string archive_dir;
};

/// Initial ensemble protocol shared with the exact-filter oracle: members
/// drawn N(truth_0, init_spread^2 I) from per-member substreams.
Ensemble make_initial_ensemble(const ExperimentConfig& cfg, const TwinRun& twin);

/// Model equivalents of a point-selection observation pattern.
Matrix equivalents_at(const Matrix& states, const std::vector<int>& pattern);

/**
 * @brief Runs the full cycled twin experiment described by the config.
 *
 * Per cycle: propagate members, score the background against withheld
 * truth and observations, inflate deviations, run the localized analysis,
 * score and archive the analysis. Bit-reproducible from the seed for any
 * worker count. Aborts with a diagnostic dump when the background RMSE
 * exceeds 10x the free-run climatological std for 5 consecutive cycles.
 */
CycledResult run_cycled(const ExperimentConfig& cfg);

/**
 * @brief Launches ensemble forecasts from every launch_every-th archived
 * analysis and scores each lead time, plus a persistence baseline.
 *
 * Writes forecast_scores.csv into the archive. Lead 0 scores the analysis
 * itself, so forecast.leads = 0 reproduces analysis-time scores.
 */
ScoreTable run_forecast(const ExperimentConfig& cfg, const std::string& archive_dir);

/// Recomputes the cycled ScoreTable from an archive and rewrites
/// scores.csv; byte-idempotent.
ScoreTable score_archive(const std::string& archive_dir);

/// Side-by-side period-aggregate CRPS and |bias| deltas of runs against
/// the first one, as CSV text.
std::string compare_runs(const std::vector<std::string>& dirs);

}  // namespace etkpf
