#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "etkpf/linalg.hpp"

namespace etkpf {

/// Continuous ranked probability score of an ensemble forecast for a
/// scalar verification, kernel form:
/// (1/k) sum |x_i - y| - (1/(2 k^2)) sum sum |x_i - x_j|.
double crps_ensemble(const Vector& members, double y);

/**
 * @brief Ratio of observed RMSE to the spread of the predictive
 * distribution, aggregated over cases.
 *
 * Numerator: root mean squared innovation (y - ensemble mean). Denominator:
 * root mean (ensemble variance + r). A ratio above one means the ensemble
 * is too concentrated. Each row of `forecasts` is one case's members.
 */
double rmse_spread_ratio(const Matrix& forecasts, const Vector& obs, const Vector& r_diag);

struct CategoricalScores {
  double ets = 0.0;
  double fbi = 0.0;   ///< NaN when no event was observed
  double bss = 0.0;
  bool fbi_defined = true;
};

/**
 * @brief Equitable threat score, frequency bias index and Brier skill
 * score of probability forecasts for a binary event.
 *
 * ETS/FBI dichotomize at probability >= threshold_prob; the Brier score is
 * normalized by the climatology forecast computed from the verification
 * set itself.
 */
CategoricalScores categorical_scores(const Vector& prob_forecasts,
                                     const std::vector<bool>& outcomes,
                                     double threshold_prob = 0.5);

struct ReliabilityBin {
  double mean_forecast = 0.0;  ///< NaN when the bin is empty
  double observed_freq = 0.0;  ///< NaN when the bin is empty
  long count = 0;
};

/// Equal-width reliability bins over [0,1]; empty bins keep count 0.
std::vector<ReliabilityBin> reliability_curve(const Vector& prob_forecasts,
                                              const std::vector<bool>& outcomes, int bins);

/// One verification record; cycle or lead may be -1 for period aggregates.
struct ScoreRow {
  int cycle = 0;
  int lead = 0;
  std::string variable;  ///< "all", "v<i>", or a reliability-bin key
  std::string metric;
  double value = 0.0;
};

/// Row-keyed score container with the CSV contract
/// cycle,lead,variable,metric,value.
struct ScoreTable {
  std::vector<ScoreRow> rows;

  void add(int cycle, int lead, std::string variable, std::string metric, double value);
  void append(const ScoreTable& other);

  /// First match or NaN.
  double value(int cycle, int lead, const std::string& variable,
               const std::string& metric) const;

  void write_csv(std::ostream& out) const;
  void write_csv_file(const std::string& path) const;
  static ScoreTable read_csv_file(const std::string& path);
};

}  // namespace etkpf
