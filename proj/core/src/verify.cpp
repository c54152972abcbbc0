#include "etkpf/verify.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace etkpf {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double crps_ensemble(const Vector& members, double y) {
  const int k = static_cast<int>(members.size());
  if (k < 1) throw Error("[verify] crps_ensemble: empty ensemble");
  double term1 = 0.0;
  for (int i = 0; i < k; ++i) term1 += std::abs(members(i) - y);
  term1 /= k;
  double term2 = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) term2 += std::abs(members(i) - members(j));
  term2 = term2 * 2.0 / (2.0 * k * k);  // full double sum halved
  return term1 - term2;
}

double rmse_spread_ratio(const Matrix& forecasts, const Vector& obs, const Vector& r_diag) {
  const int n = static_cast<int>(forecasts.rows());
  const int k = static_cast<int>(forecasts.cols());
  if (n < 1) throw Error("[verify] rmse_spread_ratio: no cases");
  if (obs.size() != n || r_diag.size() != n)
    throw Error("[verify] rmse_spread_ratio: case count mismatch");

  double msi = 0.0, var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double mean = forecasts.row(i).mean();
    const double innov = obs(i) - mean;
    msi += innov * innov;
    double v = 0.0;
    if (k > 1) {
      for (int j = 0; j < k; ++j) {
        const double dev = forecasts(i, j) - mean;
        v += dev * dev;
      }
      v /= (k - 1);
    }
    var += v + r_diag(i);
  }
  msi /= n;
  var /= n;
  if (!(var > 0.0))
    throw Error("[verify] rmse_spread_ratio: zero predictive spread and zero r");
  return std::sqrt(msi) / std::sqrt(var);
}

CategoricalScores categorical_scores(const Vector& prob_forecasts,
                                     const std::vector<bool>& outcomes,
                                     double threshold_prob) {
  const int n = static_cast<int>(prob_forecasts.size());
  if (n < 1 || static_cast<int>(outcomes.size()) != n)
    throw Error("[verify] categorical_scores: length mismatch or empty input");

  double a = 0, b = 0, c = 0;
  double brier = 0.0, base = 0.0;
  for (int i = 0; i < n; ++i) {
    const bool fc = prob_forecasts(i) >= threshold_prob;
    const bool ob = outcomes[i];
    if (fc && ob) ++a;
    else if (fc && !ob) ++b;
    else if (!fc && ob) ++c;
    const double o = ob ? 1.0 : 0.0;
    brier += (prob_forecasts(i) - o) * (prob_forecasts(i) - o);
    base += o;
  }
  brier /= n;
  const double rate = base / n;

  CategoricalScores out;
  if (b == 0 && c == 0) {
    out.ets = 1.0;  // perfect categorical forecast
  } else {
    const double ar = (a + b) * (a + c) / n;
    out.ets = (a - ar) / (a + b + c - ar);
  }
  if (a + c > 0) {
    out.fbi = (a + b) / (a + c);
  } else {
    out.fbi = kNaN;
    out.fbi_defined = false;
  }
  double brier_clim = 0.0;
  for (int i = 0; i < n; ++i) {
    const double o = outcomes[i] ? 1.0 : 0.0;
    brier_clim += (rate - o) * (rate - o);
  }
  brier_clim /= n;
  out.bss = brier_clim > 0.0 ? 1.0 - brier / brier_clim : (brier == 0.0 ? 1.0 : kNaN);
  return out;
}

std::vector<ReliabilityBin> reliability_curve(const Vector& prob_forecasts,
                                              const std::vector<bool>& outcomes, int bins) {
  if (bins < 2) throw Error("[verify] reliability_curve: need at least 2 bins");
  const int n = static_cast<int>(prob_forecasts.size());
  if (static_cast<int>(outcomes.size()) != n)
    throw Error("[verify] reliability_curve: length mismatch");

  std::vector<double> psum(bins, 0.0), osum(bins, 0.0);
  std::vector<long> count(bins, 0);
  for (int i = 0; i < n; ++i) {
    const double p = prob_forecasts(i);
    if (p < 0.0 || p > 1.0)
      throw Error("[verify] reliability_curve: probability outside [0,1]");
    int bin = static_cast<int>(p * bins);
    if (bin >= bins) bin = bins - 1;
    psum[bin] += p;
    osum[bin] += outcomes[i] ? 1.0 : 0.0;
    ++count[bin];
  }

  std::vector<ReliabilityBin> out(bins);
  for (int b = 0; b < bins; ++b) {
    out[b].count = count[b];
    out[b].mean_forecast = count[b] > 0 ? psum[b] / count[b] : kNaN;
    out[b].observed_freq = count[b] > 0 ? osum[b] / count[b] : kNaN;
  }
  return out;
}

void ScoreTable::add(int cycle, int lead, std::string variable, std::string metric,
                     double value) {
  rows.push_back({cycle, lead, std::move(variable), std::move(metric), value});
}

void ScoreTable::append(const ScoreTable& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

double ScoreTable::value(int cycle, int lead, const std::string& variable,
                         const std::string& metric) const {
  for (const auto& r : rows)
    if (r.cycle == cycle && r.lead == lead && r.variable == variable && r.metric == metric)
      return r.value;
  return kNaN;
}

void ScoreTable::write_csv(std::ostream& out) const {
  out << "cycle,lead,variable,metric,value\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    out << r.cycle << "," << r.lead << "," << r.variable << "," << r.metric << "," << buf
        << "\n";
  }
}

void ScoreTable::write_csv_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("[verify] cannot open '" + path + "' for writing");
  write_csv(out);
  if (!out) throw Error("[verify] write to '" + path + "' failed");
}

ScoreTable ScoreTable::read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("[verify] cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "cycle,lead,variable,metric,value")
    throw Error("[verify] '" + path + "': bad CSV header");

  ScoreTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    ScoreRow row;
    std::string field;
    std::getline(is, field, ',');
    row.cycle = std::stoi(field);
    std::getline(is, field, ',');
    row.lead = std::stoi(field);
    std::getline(is, row.variable, ',');
    std::getline(is, row.metric, ',');
    std::getline(is, field);
    row.value = std::stod(field);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace etkpf
