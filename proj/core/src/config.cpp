#include "etkpf/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace etkpf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& value, int line) {
  std::vector<double> out;
  std::istringstream is(value);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty element in list '" + value + "'", line);
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + item + "'", line);
    }
  }
  if (out.empty()) throw ConfigError("empty list", line);
  return out;
}

double parse_double(const std::string& value, int line) {
  if (value == "inf") return std::numeric_limits<double>::infinity();
  const auto list = parse_list(value, line);
  if (list.size() != 1) throw ConfigError("expected a single number, got list", line);
  return list[0];
}

long long parse_int(const std::string& value, int line) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse integer '" + value + "'", line);
  }
}

std::string num(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string num_list(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += num(v(i));
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  model.validate();
  gamma_policy.validate();
  if (!std::isinf(localization.radius)) localization.validate();
  GridSpec g = grid();
  g.validate();
  if (ensemble_size < 2) throw ConfigError("ensemble.size must be >= 2");
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  if (spinup_cycles < 0 || spinup_cycles >= cycles)
    throw ConfigError("spinup_cycles must be in [0, cycles)");
  if (forecast_leads < 0) throw ConfigError("forecast.leads must be >= 0");
  if (forecast_launch_every < 1) throw ConfigError("forecast.launch_every must be >= 1");
  if (inflation < 1.0) throw ConfigError("inflation must be >= 1");
  if (!(init_spread >= 0.0)) throw ConfigError("ensemble.init_spread must be >= 0");
  if (obs_pattern.empty()) throw ConfigError("observation pattern is empty");
  for (const int s : obs_pattern)
    if (s < 0 || s >= model.dim) throw ConfigError("observed index out of range");
  if (obs_r.size() != static_cast<Eigen::Index>(obs_pattern.size()))
    throw ConfigError("obs.r length does not match the observed index count");
  for (Eigen::Index i = 0; i < obs_r.size(); ++i)
    if (!(obs_r(i) > 0)) throw ConfigError("obs.r entries must be positive");
  if (output.empty()) throw ConfigError("output directory is empty");
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::pair<std::string, int>> kv;
  {
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
      ++lineno;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      const std::string line = trim(raw);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected key=value, got '" + line + "'", lineno);
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key", lineno);
      if (value.empty()) throw ConfigError("empty value for key '" + key + "'", lineno);
      if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'", lineno);
      kv[key] = {value, lineno};
    }
  }

  ExperimentConfig cfg;
  int obs_every = 0, obs_offset = 0;
  std::vector<double> obs_r_raw{1.0};
  std::vector<double> transition_raw, noise_raw;

  auto take = [&](const char* key) -> std::optional<std::pair<std::string, int>> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    auto payload = it->second;
    kv.erase(it);
    return payload;
  };

  if (auto v = take("model.kind")) {
    if (v->first == "lorenz96") cfg.model.kind = ModelSpec::Kind::lorenz96;
    else if (v->first == "linear_gaussian") cfg.model.kind = ModelSpec::Kind::linear_gaussian;
    else throw ConfigError("unknown model.kind '" + v->first + "'", v->second);
  }
  if (auto v = take("model.dim")) cfg.model.dim = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("model.lorenz.forcing")) cfg.model.forcing = parse_double(v->first, v->second);
  if (auto v = take("model.lorenz.dt")) cfg.model.dt = parse_double(v->first, v->second);
  if (auto v = take("model.lorenz.steps_per_cycle"))
    cfg.model.steps_per_cycle = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("model.linear.transition")) transition_raw = parse_list(v->first, v->second);
  if (auto v = take("model.linear.noise_var")) noise_raw = parse_list(v->first, v->second);

  if (auto v = take("filter.variant")) {
    if (v->first == "deterministic") cfg.variant = AnalysisVariant::deterministic;
    else if (v->first == "stochastic") cfg.variant = AnalysisVariant::stochastic;
    else throw ConfigError("unknown filter.variant '" + v->first + "'", v->second);
  }
  if (auto v = take("filter.gamma.kind")) {
    if (v->first == "fixed") cfg.gamma_policy.kind = GammaKind::fixed;
    else if (v->first == "ess_target") cfg.gamma_policy.kind = GammaKind::ess_target;
    else if (v->first == "min_mse") cfg.gamma_policy.kind = GammaKind::min_mse;
    else throw ConfigError("unknown filter.gamma.kind '" + v->first + "'", v->second);
  }
  if (auto v = take("filter.gamma.value"))
    cfg.gamma_policy.fixed_value = parse_double(v->first, v->second);
  if (auto v = take("filter.gamma.ess_fraction"))
    cfg.gamma_policy.ess_fraction = parse_double(v->first, v->second);
  if (auto v = take("filter.gamma.grid")) cfg.gamma_policy.grid = parse_list(v->first, v->second);

  if (auto v = take("localization.radius"))
    cfg.localization.radius = parse_double(v->first, v->second);
  if (auto v = take("localization.stride"))
    cfg.coarse_stride = static_cast<int>(parse_int(v->first, v->second));

  if (auto v = take("ensemble.size"))
    cfg.ensemble_size = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("ensemble.init_spread")) cfg.init_spread = parse_double(v->first, v->second);

  if (auto v = take("cycles")) cfg.cycles = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("spinup_cycles"))
    cfg.spinup_cycles = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("forecast.leads"))
    cfg.forecast_leads = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("forecast.launch_every"))
    cfg.forecast_launch_every = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("inflation")) cfg.inflation = parse_double(v->first, v->second);

  if (auto v = take("obs.every")) obs_every = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("obs.offset")) obs_offset = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("obs.indices")) {
    for (const double x : parse_list(v->first, v->second))
      cfg.obs_pattern.push_back(static_cast<int>(x));
  }
  if (auto v = take("obs.r")) obs_r_raw = parse_list(v->first, v->second);

  if (auto v = take("score.event_threshold")) {
    if (v->first != "auto") cfg.event_threshold = parse_double(v->first, v->second);
  }

  if (auto v = take("seed")) cfg.seed = static_cast<std::uint64_t>(parse_int(v->first, v->second));
  if (auto v = take("threads")) cfg.threads = static_cast<int>(parse_int(v->first, v->second));
  if (auto v = take("output")) cfg.output = v->first;

  if (!kv.empty()) {
    const auto& [key, payload] = *kv.begin();
    throw ConfigError("unknown key '" + key + "'", payload.second);
  }

  // Derived fields.
  if (cfg.obs_pattern.empty()) {
    if (obs_every <= 0) obs_every = 1;
    for (int s = obs_offset; s < cfg.model.dim; s += obs_every) cfg.obs_pattern.push_back(s);
  } else if (obs_every > 0) {
    throw ConfigError("obs.every and obs.indices are mutually exclusive");
  }

  const int d = static_cast<int>(cfg.obs_pattern.size());
  if (static_cast<int>(obs_r_raw.size()) == 1) {
    cfg.obs_r = Vector::Constant(d, obs_r_raw[0]);
  } else {
    if (static_cast<int>(obs_r_raw.size()) != d)
      throw ConfigError("obs.r list length " + std::to_string(obs_r_raw.size()) +
                        " does not match observed count " + std::to_string(d));
    cfg.obs_r = Eigen::Map<const Vector>(obs_r_raw.data(), d);
  }

  if (cfg.model.kind == ModelSpec::Kind::linear_gaussian) {
    auto expand = [&](const std::vector<double>& raw, const char* what) {
      if (raw.empty()) throw ConfigError(std::string("model.linear.") + what + " is required");
      if (raw.size() == 1) return Vector::Constant(cfg.model.dim, raw[0]).eval();
      if (static_cast<int>(raw.size()) != cfg.model.dim)
        throw ConfigError(std::string("model.linear.") + what + " length does not match dim");
      return Eigen::Map<const Vector>(raw.data(), cfg.model.dim).eval();
    };
    cfg.model.transition = expand(transition_raw, "transition");
    cfg.model.noise_var = expand(noise_raw, "noise_var");
  } else if (!transition_raw.empty() || !noise_raw.empty()) {
    throw ConfigError("model.linear.* keys are only valid for model.kind=linear_gaussian");
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "model.kind = "
     << (cfg.model.kind == ModelSpec::Kind::lorenz96 ? "lorenz96" : "linear_gaussian") << "\n";
  os << "model.dim = " << cfg.model.dim << "\n";
  if (cfg.model.kind == ModelSpec::Kind::lorenz96) {
    os << "model.lorenz.forcing = " << num(cfg.model.forcing) << "\n";
    os << "model.lorenz.dt = " << num(cfg.model.dt) << "\n";
    os << "model.lorenz.steps_per_cycle = " << cfg.model.steps_per_cycle << "\n";
  } else {
    os << "model.linear.transition = " << num_list(cfg.model.transition) << "\n";
    os << "model.linear.noise_var = " << num_list(cfg.model.noise_var) << "\n";
  }
  os << "filter.variant = "
     << (cfg.variant == AnalysisVariant::deterministic ? "deterministic" : "stochastic")
     << "\n";
  switch (cfg.gamma_policy.kind) {
    case GammaKind::fixed:
      os << "filter.gamma.kind = fixed\n";
      os << "filter.gamma.value = " << num(cfg.gamma_policy.fixed_value) << "\n";
      break;
    case GammaKind::ess_target:
      os << "filter.gamma.kind = ess_target\n";
      os << "filter.gamma.ess_fraction = " << num(cfg.gamma_policy.ess_fraction) << "\n";
      break;
    case GammaKind::min_mse:
      os << "filter.gamma.kind = min_mse\n";
      break;
  }
  if (cfg.gamma_policy.kind != GammaKind::fixed) {
    os << "filter.gamma.grid = ";
    for (std::size_t i = 0; i < cfg.gamma_policy.grid.size(); ++i)
      os << (i ? "," : "") << num(cfg.gamma_policy.grid[i]);
    os << "\n";
  }
  os << "localization.radius = " << num(cfg.localization.radius) << "\n";
  os << "localization.stride = " << cfg.coarse_stride << "\n";
  os << "ensemble.size = " << cfg.ensemble_size << "\n";
  os << "ensemble.init_spread = " << num(cfg.init_spread) << "\n";
  os << "cycles = " << cfg.cycles << "\n";
  os << "spinup_cycles = " << cfg.spinup_cycles << "\n";
  os << "forecast.leads = " << cfg.forecast_leads << "\n";
  os << "forecast.launch_every = " << cfg.forecast_launch_every << "\n";
  os << "inflation = " << num(cfg.inflation) << "\n";
  os << "obs.indices = ";
  for (std::size_t i = 0; i < cfg.obs_pattern.size(); ++i)
    os << (i ? "," : "") << cfg.obs_pattern[i];
  os << "\n";
  os << "obs.r = " << num_list(cfg.obs_r) << "\n";
  if (std::isnan(cfg.event_threshold)) os << "score.event_threshold = auto\n";
  else os << "score.event_threshold = " << num(cfg.event_threshold) << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "threads = " << cfg.threads << "\n";
  os << "output = " << cfg.output << "\n";
  return os.str();
}

}  // namespace etkpf
