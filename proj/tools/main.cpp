#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "etkpf/harness.hpp"

namespace {

struct GlobalOverrides {
  std::int64_t seed = -1;
  int threads = -1;
  std::string output;
};

etkpf::ExperimentConfig load_with_overrides(const std::string& path,
                                            const GlobalOverrides& g) {
  etkpf::ExperimentConfig cfg = etkpf::load_config_file(path);
  if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
  if (g.threads >= 0) cfg.threads = g.threads;
  if (!g.output.empty()) cfg.output = g.output;
  return cfg;
}

void report_summary(const etkpf::ScoreTable& scores, int lead) {
  const double rmse = scores.value(-1, lead, "all", "rmse");
  const double crps = scores.value(-1, lead, "all", "crps");
  const double spread = scores.value(-1, lead, "all", "spread");
  std::cout << "  mean background rmse " << rmse << ", crps " << crps << ", spread "
            << spread << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid ensemble transform Kalman particle filter twin-experiment harness"};
  app.require_subcommand(1);

  GlobalOverrides global;
  app.add_option("--seed", global.seed, "Override the config seed");
  app.add_option("--threads", global.threads,
                 "Override worker count (0 = ETKPF_THREADS or hardware)");
  app.add_option("--output", global.output, "Override the output directory");

  std::string config_path, archive_dir, out_file;
  std::vector<std::string> compare_dirs;

  CLI::App* cycle = app.add_subcommand("cycle", "Run a cycled assimilation experiment");
  cycle->add_option("config", config_path, "Experiment config file")->required();

  CLI::App* forecast =
      app.add_subcommand("forecast", "Launch and score forecasts from an archive");
  forecast->add_option("config", config_path, "Experiment config file")->required();
  forecast->add_option("--archive", archive_dir, "Archive directory of the cycled run");

  CLI::App* score = app.add_subcommand("score", "Recompute the score table of an archive");
  score->add_option("dir", archive_dir, "Archive directory")->required();

  CLI::App* compare =
      app.add_subcommand("compare", "Aggregate score deltas of runs against the first");
  compare->add_option("dirs", compare_dirs, "Run directories (first is the reference)")
      ->expected(-2);
  compare->add_option("--out", out_file, "Write the comparison CSV to a file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cycle->parsed()) {
      const auto cfg = load_with_overrides(config_path, global);
      const auto result = etkpf::run_cycled(cfg);
      std::cout << "archived " << cfg.cycles << " cycles in " << result.archive_dir << "\n";
      report_summary(result.scores, 1);
    } else if (forecast->parsed()) {
      const auto cfg = load_with_overrides(config_path, global);
      const std::string dir = archive_dir.empty() ? cfg.output : archive_dir;
      const auto scores = etkpf::run_forecast(cfg, dir);
      std::cout << "forecast scores written to " << dir << "/forecast_scores.csv\n";
    } else if (score->parsed()) {
      const auto scores = etkpf::score_archive(archive_dir);
      std::cout << "recomputed " << scores.rows.size() << " score rows in " << archive_dir
                << "/scores.csv\n";
    } else if (compare->parsed()) {
      const std::string csv = etkpf::compare_runs(compare_dirs);
      if (out_file.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw etkpf::Error("[cli] cannot open '" + out_file + "'");
        out << csv;
      }
    }
  } catch (const etkpf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
