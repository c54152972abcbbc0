#include "etkpf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "etkpf/archive.hpp"
#include "etkpf/parallel.hpp"
#include "etkpf/rng.hpp"

namespace fs = std::filesystem;

namespace etkpf {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974u;
constexpr std::uint64_t kPropTag = 0x70726f70u;
constexpr std::uint64_t kAnalTag = 0x616e616cu;
constexpr std::uint64_t kFcstTag = 0x66637374u;
constexpr int kClimatologySteps = 10000;

std::string cycle_path(const std::string& dir, int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cycle_%05d.bin", t);
  return dir + "/" + buf;
}

std::string gstr(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Vector ensemble_mean(const Matrix& states) { return states.rowwise().mean(); }

Vector ensemble_spread(const Matrix& states) {
  const int k = static_cast<int>(states.cols());
  const Vector mean = ensemble_mean(states);
  Vector var = Vector::Zero(states.rows());
  for (int j = 0; j < k; ++j) var += (states.col(j) - mean).cwiseAbs2();
  return (var / std::max(1, k - 1)).cwiseSqrt();
}

double rmse_vs(const Matrix& states, const Vector& truth) {
  const Vector err = ensemble_mean(states) - truth;
  return std::sqrt(err.squaredNorm() / err.size());
}

/// rmse, bias, spread and mean per-variable CRPS rows for one ensemble.
void score_ensemble(ScoreTable& table, int cycle, int lead, const Matrix& states,
                    const Vector& truth) {
  const Vector mean = ensemble_mean(states);
  const Vector err = mean - truth;
  const Vector spread = ensemble_spread(states);
  double crps = 0.0;
  for (Eigen::Index v = 0; v < truth.size(); ++v)
    crps += crps_ensemble(states.row(v).transpose(), truth(v));
  crps /= truth.size();

  table.add(cycle, lead, "all", "rmse", std::sqrt(err.squaredNorm() / err.size()));
  table.add(cycle, lead, "all", "bias", err.mean());
  table.add(cycle, lead, "all", "spread",
            std::sqrt(spread.squaredNorm() / spread.size()));
  table.add(cycle, lead, "all", "crps", crps);
}

/// Shared between run_cycled and score_archive so both emit byte-identical
/// tables.
ScoreTable compute_cycle_scores(const ExperimentConfig& cfg, const TwinRun& twin,
                                const std::vector<Matrix>& background,
                                const std::vector<Matrix>& analysis) {
  const int cycles = static_cast<int>(background.size());
  const int q = cfg.model.dim;
  ScoreTable table;

  for (int t = 1; t <= cycles; ++t) {
    const Vector truth = twin.truth.col(t);
    score_ensemble(table, t, 1, background[t - 1], truth);
    const Matrix eq = equivalents_at(background[t - 1], twin.obs_sites);
    table.add(t, 1, "all", "rmse_spread_ratio",
              rmse_spread_ratio(eq, twin.obs.col(t - 1), twin.r_diag));
    score_ensemble(table, t, 0, analysis[t - 1], truth);
  }

  // Period aggregates over post-spin-up cycles.
  const int first = cfg.spinup_cycles + 1;
  const int n = cycles - cfg.spinup_cycles;
  if (n <= 0) return table;

  const char* all_metrics[] = {"rmse", "bias", "spread", "crps", "rmse_spread_ratio"};
  for (const int lead : {1, 0}) {
    for (const char* metric : all_metrics) {
      if (lead == 0 && std::string(metric) == "rmse_spread_ratio") continue;
      double sum = 0.0;
      for (int t = first; t <= cycles; ++t) sum += table.value(t, lead, "all", metric);
      table.add(-1, lead, "all", metric, sum / n);
    }
  }

  // Per-variable background CRPS and bias, the quantities compared across
  // methods.
  for (int v = 0; v < q; ++v) {
    double crps_sum = 0.0, bias_sum = 0.0;
    for (int t = first; t <= cycles; ++t) {
      const Matrix& states = background[t - 1];
      crps_sum += crps_ensemble(states.row(v).transpose(), twin.truth(v, t));
      bias_sum += states.row(v).mean() - twin.truth(v, t);
    }
    table.add(-1, 1, "v" + std::to_string(v), "crps", crps_sum / n);
    table.add(-1, 1, "v" + std::to_string(v), "bias", bias_sum / n);
  }
  return table;
}

void write_gamma_ess_csv(const std::string& path, const std::vector<Vector>& gammas,
                         const std::vector<Vector>& esses,
                         const std::vector<int>& sites) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("[harness] cannot open '" + path + "' for writing");
  out << "cycle,site_index,gamma,ess\n";
  for (std::size_t t = 0; t < gammas.size(); ++t)
    for (Eigen::Index s = 0; s < gammas[t].size(); ++s)
      out << (t + 1) << "," << sites[static_cast<std::size_t>(s)] << ","
          << gstr(gammas[t](s)) << "," << gstr(esses[t](s)) << "\n";
}

void write_manifest(const std::string& dir, const ExperimentConfig& cfg,
                    const Climatology& clim) {
  std::ofstream out(dir + "/MANIFEST", std::ios::binary);
  if (!out) throw Error("[harness] cannot write MANIFEST in '" + dir + "'");
  out << "etkpf-run v1\n";
  out << "config_hash " << fnv1a_hex(serialize_config(cfg)) << "\n";
  out << "seed " << cfg.seed << "\n";
  out << "cycles " << cfg.cycles << "\n";
  out << "dim " << cfg.model.dim << "\n";
  out << "members " << cfg.ensemble_size << "\n";
  out << "climatology_mean " << gstr(clim.mean) << "\n";
  out << "climatology_std " << gstr(clim.std) << "\n";
}

}  // namespace

Ensemble make_initial_ensemble(const ExperimentConfig& cfg, const TwinRun& twin) {
  Matrix states(cfg.model.dim, cfg.ensemble_size);
  for (int i = 0; i < cfg.ensemble_size; ++i) {
    Rng rng(derive_seed(cfg.seed, kInitTag, static_cast<std::uint64_t>(i)));
    for (int v = 0; v < cfg.model.dim; ++v)
      states(v, i) = twin.truth(v, 0) + cfg.init_spread * rng.normal();
  }
  return Ensemble(std::move(states));
}

Matrix equivalents_at(const Matrix& states, const std::vector<int>& pattern) {
  Matrix eq(static_cast<Eigen::Index>(pattern.size()), states.cols());
  for (std::size_t i = 0; i < pattern.size(); ++i) eq.row(static_cast<Eigen::Index>(i)) = states.row(pattern[i]);
  return eq;
}

CycledResult run_cycled(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output);

  const TwinRun twin =
      make_twin(cfg.model, cfg.cycles, cfg.obs_pattern, cfg.obs_r, cfg.seed);
  save_twin(cfg.output + "/twin.bin", twin);

  const Climatology clim = climatology_stats(cfg.model, kClimatologySteps, cfg.seed);
  const GridSpec grid = cfg.grid();
  std::vector<double> obs_coords(cfg.obs_pattern.begin(), cfg.obs_pattern.end());

  Matrix states = make_initial_ensemble(cfg, twin).states;
  const int k = cfg.ensemble_size;

  std::vector<Matrix> bg_store, an_store;
  std::vector<Vector> gamma_store, ess_store;
  std::vector<int> diag_sites;
  bg_store.reserve(cfg.cycles);
  an_store.reserve(cfg.cycles);

  int divergence_streak = 0;
  for (int t = 1; t <= cfg.cycles; ++t) {
    // Propagate members on independent substreams so the result does not
    // depend on worker count.
    Matrix next(cfg.model.dim, k);
    const std::uint64_t prop_seed = derive_seed(cfg.seed, kPropTag, static_cast<std::uint64_t>(t));
    parallel_for(k, cfg.threads, [&](int i) {
      Rng rng(derive_seed(prop_seed, static_cast<std::uint64_t>(i)));
      next.col(i) = step_noisy(cfg.model, states.col(i), rng);
    });
    states = std::move(next);
    bg_store.push_back(states);

    const double bg_rmse = rmse_vs(states, twin.truth.col(t));
    if (bg_rmse > 10.0 * clim.std) {
      if (++divergence_streak >= 5) {
        std::ofstream dump(cfg.output + "/DIVERGENCE.txt");
        dump << "cycle " << t << "\nbackground_rmse " << gstr(bg_rmse)
             << "\nclimatology_std " << gstr(clim.std) << "\nensemble_mean";
        const Vector mean = ensemble_mean(states);
        for (Eigen::Index v = 0; v < mean.size(); ++v) dump << " " << gstr(mean(v));
        dump << "\ntruth";
        for (Eigen::Index v = 0; v < mean.size(); ++v)
          dump << " " << gstr(twin.truth(v, t));
        dump << "\n";
        throw Error("[harness] filter divergence: background RMSE " + gstr(bg_rmse) +
                    " above 10x climatology for 5 consecutive cycles (cycle " +
                    std::to_string(t) + "), dump in " + cfg.output + "/DIVERGENCE.txt");
      }
    } else {
      divergence_streak = 0;
    }

    // Multiplicative inflation of the deviations, then the local analysis.
    const Vector mean = ensemble_mean(states);
    Matrix inflated = ((states.colwise() - mean) * cfg.inflation).colwise() + mean;

    ObsField field;
    field.batch = ObsBatch(twin.obs.col(t - 1), twin.r_diag,
                           equivalents_at(inflated, cfg.obs_pattern));
    field.sites = obs_coords;

    const LocalAnalysis la = local_analysis_field(
        Ensemble(std::move(inflated)), field, grid, cfg.localization, cfg.gamma_policy,
        cfg.variant, derive_seed(cfg.seed, kAnalTag, static_cast<std::uint64_t>(t)),
        cfg.threads);
    states = la.analysis.states;
    an_store.push_back(states);

    const int nc = static_cast<int>(la.diag.site.size());
    Vector gvec(nc), evec(nc);
    for (int s = 0; s < nc; ++s) {
      gvec(s) = la.diag.gamma[s];
      evec(s) = la.diag.ess[s];
    }
    gamma_store.push_back(gvec);
    ess_store.push_back(evec);
    if (t == 1) diag_sites = la.diag.site;

    BlockFile file;
    file.add_meta("cycle", static_cast<std::uint64_t>(t));
    file.add_block("background", bg_store.back());
    file.add_block("analysis", an_store.back());
    file.add_block("bg_mean", ensemble_mean(bg_store.back()));
    file.add_block("bg_spread", ensemble_spread(bg_store.back()));
    file.add_block("an_mean", ensemble_mean(an_store.back()));
    file.add_block("an_spread", ensemble_spread(an_store.back()));
    file.add_block("gamma", gvec);
    file.add_block("ess", evec);
    write_block_file(cycle_path(cfg.output, t), file);
  }

  CycledResult result;
  result.scores = compute_cycle_scores(cfg, twin, bg_store, an_store);
  result.climatology = clim;
  result.archive_dir = cfg.output;

  result.scores.write_csv_file(cfg.output + "/scores.csv");
  write_gamma_ess_csv(cfg.output + "/gamma_ess.csv", gamma_store, ess_store, diag_sites);
  {
    std::ofstream out(cfg.output + "/config.cfg", std::ios::binary);
    out << serialize_config(cfg);
  }
  write_manifest(cfg.output, cfg, clim);
  return result;
}

ScoreTable run_forecast(const ExperimentConfig& cfg, const std::string& archive_dir) {
  cfg.validate();
  const TwinRun twin = load_twin(archive_dir + "/twin.bin");
  if (twin.truth.rows() != cfg.model.dim)
    throw Error("[harness] run_forecast: archive dimension does not match config");
  const int cycles = twin.cycles();

  const Climatology clim = climatology_stats(cfg.model, kClimatologySteps, cfg.seed);
  const double threshold =
      std::isnan(cfg.event_threshold) ? clim.mean + clim.std : cfg.event_threshold;

  std::vector<int> launches;
  for (int t = cfg.forecast_launch_every; t <= cycles; t += cfg.forecast_launch_every)
    launches.push_back(t);
  if (launches.empty()) throw Error("[harness] run_forecast: no launch cycles");

  const int leads = cfg.forecast_leads;
  const int q = cfg.model.dim;
  ScoreTable table;

  // Per-lead accumulators for aggregates.
  std::vector<double> crps_sum(leads + 1, 0.0), rmse_sum(leads + 1, 0.0),
      bias_sum(leads + 1, 0.0), spread_sum(leads + 1, 0.0), pers_sum(leads + 1, 0.0);
  std::vector<int> count(leads + 1, 0);
  std::vector<std::vector<double>> probs(leads + 1);
  std::vector<std::vector<bool>> outcomes(leads + 1);

  for (const int t : launches) {
    const BlockFile file = read_block_file(cycle_path(archive_dir, t));
    Matrix ens = file.block_at("analysis");
    const Matrix frozen = ens;  // persistence baseline
    const int k = static_cast<int>(ens.cols());

    for (int lead = 0; lead <= leads && t + lead <= cycles; ++lead) {
      if (lead > 0) {
        Matrix next(q, k);
        const std::uint64_t lead_seed = derive_seed(
            derive_seed(cfg.seed, kFcstTag, static_cast<std::uint64_t>(t)),
            static_cast<std::uint64_t>(lead));
        parallel_for(k, cfg.threads, [&](int i) {
          Rng rng(derive_seed(lead_seed, static_cast<std::uint64_t>(i)));
          next.col(i) = step_noisy(cfg.model, ens.col(i), rng);
        });
        ens = std::move(next);
      }
      const Vector truth = twin.truth.col(t + lead);
      score_ensemble(table, t, lead, ens, truth);

      const Vector mean = ensemble_mean(ens);
      const Vector err = mean - truth;
      rmse_sum[lead] += std::sqrt(err.squaredNorm() / q);
      bias_sum[lead] += err.mean();
      const Vector spread = ensemble_spread(ens);
      spread_sum[lead] += std::sqrt(spread.squaredNorm() / q);
      double crps = 0.0, pers = 0.0;
      for (int v = 0; v < q; ++v) {
        crps += crps_ensemble(ens.row(v).transpose(), truth(v));
        pers += crps_ensemble(frozen.row(v).transpose(), truth(v));
      }
      crps_sum[lead] += crps / q;
      pers_sum[lead] += pers / q;
      ++count[lead];

      for (int v = 0; v < q; ++v) {
        int above = 0;
        for (int j = 0; j < k; ++j)
          if (ens(v, j) > threshold) ++above;
        probs[lead].push_back(static_cast<double>(above) / k);
        outcomes[lead].push_back(truth(v) > threshold);
      }
    }
  }

  double all_crps = 0.0, all_rmse = 0.0, all_bias = 0.0;
  int all_count = 0;
  for (int lead = 0; lead <= leads; ++lead) {
    if (count[lead] == 0) continue;
    table.add(-1, lead, "all", "crps", crps_sum[lead] / count[lead]);
    table.add(-1, lead, "all", "rmse", rmse_sum[lead] / count[lead]);
    table.add(-1, lead, "all", "bias", bias_sum[lead] / count[lead]);
    table.add(-1, lead, "all", "spread", spread_sum[lead] / count[lead]);
    table.add(-1, lead, "persistence", "crps", pers_sum[lead] / count[lead]);
    all_crps += crps_sum[lead];
    all_rmse += rmse_sum[lead];
    all_bias += bias_sum[lead];
    all_count += count[lead];

    const int n = static_cast<int>(probs[lead].size());
    const Vector pvec = Eigen::Map<const Vector>(probs[lead].data(), n);
    const CategoricalScores cs = categorical_scores(pvec, outcomes[lead]);
    table.add(-1, lead, "all", "ets", cs.ets);
    table.add(-1, lead, "all", "fbi", cs.fbi);
    table.add(-1, lead, "all", "bss", cs.bss);
    const auto bins = reliability_curve(pvec, outcomes[lead], 10);
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const std::string tag = "bin" + std::to_string(b);
      table.add(-1, lead, tag + "/fcst", "reliability_bin", bins[b].mean_forecast);
      table.add(-1, lead, tag + "/obs", "reliability_bin", bins[b].observed_freq);
      table.add(-1, lead, tag + "/count", "reliability_bin",
                static_cast<double>(bins[b].count));
    }
  }
  if (all_count > 0) {
    table.add(-1, -1, "all", "crps", all_crps / all_count);
    table.add(-1, -1, "all", "rmse", all_rmse / all_count);
    table.add(-1, -1, "all", "bias", all_bias / all_count);
  }

  table.write_csv_file(archive_dir + "/forecast_scores.csv");
  return table;
}

ScoreTable score_archive(const std::string& archive_dir) {
  ExperimentConfig cfg = load_config_file(archive_dir + "/config.cfg");
  const TwinRun twin = load_twin(archive_dir + "/twin.bin");
  std::vector<Matrix> bg, an;
  bg.reserve(twin.cycles());
  an.reserve(twin.cycles());
  for (int t = 1; t <= twin.cycles(); ++t) {
    const BlockFile file = read_block_file(cycle_path(archive_dir, t));
    bg.push_back(file.block_at("background"));
    an.push_back(file.block_at("analysis"));
  }
  ScoreTable table = compute_cycle_scores(cfg, twin, bg, an);
  table.write_csv_file(archive_dir + "/scores.csv");
  return table;
}

std::string compare_runs(const std::vector<std::string>& dirs) {
  if (dirs.size() < 2) throw Error("[harness] compare: need at least two run directories");

  std::vector<ScoreTable> tables;
  std::vector<std::string> names;
  for (const auto& dir : dirs) {
    tables.push_back(ScoreTable::read_csv_file(dir + "/scores.csv"));
    fs::path p(dir);
    std::string name = p.filename().string();
    if (name.empty()) name = p.parent_path().filename().string();
    names.push_back(name.empty() ? dir : name);
  }

  std::ostringstream os;
  os << "variable,lead,metric," << names[0];
  for (std::size_t i = 1; i < names.size(); ++i) os << ",delta_" << names[i];
  os << "\n";

  for (const auto& row : tables[0].rows) {
    if (row.cycle != -1) continue;
    if (row.metric != "crps" && row.metric != "bias") continue;
    const bool is_bias = row.metric == "bias";
    const double ref = is_bias ? std::abs(row.value) : row.value;
    os << row.variable << "," << row.lead << "," << row.metric << "," << gstr(ref);
    for (std::size_t i = 1; i < tables.size(); ++i) {
      const double other = tables[i].value(row.cycle, row.lead, row.variable, row.metric);
      const double val = is_bias ? std::abs(other) : other;
      os << "," << gstr(val - ref);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace etkpf
