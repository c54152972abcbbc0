#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "etkpf/gamma.hpp"
#include "etkpf/local.hpp"
#include "etkpf/models.hpp"

namespace etkpf {

/// Config load failure with position information; the CLI maps this to
/// exit code 2.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& msg, int line = 0)
      : Error(line > 0 ? "[config] line " + std::to_string(line) + ": " + msg
                       : "[config] " + msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/**
 * @brief One cycled twin experiment, fully specified.
 *
 * Parsed from flat key=value text with dotted section prefixes; unknown
 * keys are a load-time error. serialize() emits a canonical form that
 * parses back to an equal config.
 */
struct ExperimentConfig {
  ModelSpec model;

  AnalysisVariant variant = AnalysisVariant::deterministic;
  GammaPolicy gamma_policy;

  LocalizationSpec localization{4.0};
  int coarse_stride = 1;

  int ensemble_size = 20;
  int cycles = 100;
  int spinup_cycles = 0;  ///< cycles excluded from aggregate scores
  int forecast_leads = 0;
  int forecast_launch_every = 1;
  double inflation = 1.0;
  double init_spread = 1.0;

  std::vector<int> obs_pattern;  ///< observed state indices
  Vector obs_r;                  ///< variances, one per observed index
  double event_threshold = std::numeric_limits<double>::quiet_NaN();  ///< NaN = auto

  std::uint64_t seed = 42;
  int threads = 0;  ///< 0 = ETKPF_THREADS or hardware
  std::string output = "out/run";

  GridSpec grid() const { return GridSpec{model.dim, coarse_stride}; }
  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace etkpf
