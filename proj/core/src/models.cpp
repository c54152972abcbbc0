#include "etkpf/models.hpp"

#include <cmath>

#include "etkpf/archive.hpp"

namespace etkpf {

void ModelSpec::validate() const {
  if (dim < 1) throw Error("[models] spec: dim must be >= 1");
  if (kind == Kind::lorenz96) {
    if (!(dt > 0)) throw Error("[models] spec: dt must be positive");
    if (steps_per_cycle < 1) throw Error("[models] spec: steps_per_cycle must be >= 1");
    if (dim < 4) throw Error("[models] spec: lorenz96 needs dim >= 4");
  } else {
    if (transition.size() != dim) throw Error("[models] spec: transition length != dim");
    if (noise_var.size() != dim) throw Error("[models] spec: noise_var length != dim");
    for (Eigen::Index i = 0; i < noise_var.size(); ++i)
      if (noise_var(i) < 0) throw Error("[models] spec: negative model-noise variance");
  }
}

namespace {

Vector l96_tendency(const Vector& x, double forcing) {
  const int q = static_cast<int>(x.size());
  Vector dx(q);
  for (int i = 0; i < q; ++i) {
    const int ip1 = (i + 1) % q;
    const int im1 = (i - 1 + q) % q;
    const int im2 = (i - 2 + q) % q;
    dx(i) = (x(ip1) - x(im2)) * x(im1) - x(i) + forcing;
  }
  return dx;
}

Vector rk4_step(const Vector& x, double dt, double forcing) {
  const Vector k1 = l96_tendency(x, forcing);
  const Vector k2 = l96_tendency(x + 0.5 * dt * k1, forcing);
  const Vector k3 = l96_tendency(x + 0.5 * dt * k2, forcing);
  const Vector k4 = l96_tendency(x + dt * k3, forcing);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_finite(const Vector& x, const char* where) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!std::isfinite(x(i)))
      throw Error(std::string("[models] ") + where + ": non-finite state at index " +
                  std::to_string(i));
}

/// One integration step (single RK4 step or one linear multiply).
Vector single_step(const ModelSpec& spec, const Vector& state, Rng* rng) {
  if (spec.kind == ModelSpec::Kind::lorenz96) return rk4_step(state, spec.dt, spec.forcing);
  Vector next = spec.transition.asDiagonal() * state;
  if (rng) {
    for (Eigen::Index i = 0; i < next.size(); ++i)
      if (spec.noise_var(i) > 0) next(i) += std::sqrt(spec.noise_var(i)) * rng->normal();
  }
  return next;
}

}  // namespace

Vector step(const ModelSpec& spec, const Vector& state) {
  spec.validate();
  if (state.size() != spec.dim) throw Error("[models] step: state length != dim");
  Vector x = state;
  if (spec.kind == ModelSpec::Kind::lorenz96) {
    for (int s = 0; s < spec.steps_per_cycle; ++s) x = rk4_step(x, spec.dt, spec.forcing);
  } else {
    x = single_step(spec, x, nullptr);
  }
  check_finite(x, "step");
  return x;
}

Vector step_noisy(const ModelSpec& spec, const Vector& state, Rng& rng) {
  spec.validate();
  if (state.size() != spec.dim) throw Error("[models] step_noisy: state length != dim");
  Vector x = state;
  if (spec.kind == ModelSpec::Kind::lorenz96) {
    for (int s = 0; s < spec.steps_per_cycle; ++s) x = rk4_step(x, spec.dt, spec.forcing);
  } else {
    x = single_step(spec, x, &rng);
  }
  check_finite(x, "step_noisy");
  return x;
}

TwinRun make_twin(const ModelSpec& spec, int cycles, const std::vector<int>& obs_pattern,
                  const Vector& r_diag, std::uint64_t seed) {
  spec.validate();
  if (cycles < 1) throw Error("[models] make_twin: cycles must be >= 1");
  const int d = static_cast<int>(obs_pattern.size());
  if (d < 1) throw Error("[models] make_twin: empty observation pattern");
  if (r_diag.size() != d) throw Error("[models] make_twin: r_diag length != pattern size");
  for (const int s : obs_pattern)
    if (s < 0 || s >= spec.dim) throw Error("[models] make_twin: observation site out of range");

  TwinRun twin;
  twin.seed = seed;
  twin.obs_sites = obs_pattern;
  twin.r_diag = r_diag;
  twin.truth.resize(spec.dim, cycles + 1);
  twin.obs.resize(d, cycles);

  Rng rng(derive_seed(seed, 0x7477696eu));

  // Spin-up: 1000 integration steps for lorenz96 from a seeded perturbation
  // of the resting state, 100 noisy steps from zero for the linear model.
  Vector x(spec.dim);
  if (spec.kind == ModelSpec::Kind::lorenz96) {
    x.setConstant(spec.forcing);
    for (int i = 0; i < spec.dim; ++i) x(i) += 0.01 * rng.normal();
    for (int s = 0; s < 1000; ++s) x = rk4_step(x, spec.dt, spec.forcing);
  } else {
    x.setZero();
    for (int s = 0; s < 100; ++s) x = single_step(spec, x, &rng);
  }
  check_finite(x, "make_twin spin-up");
  twin.truth.col(0) = x;

  for (int t = 1; t <= cycles; ++t) {
    x = step_noisy(spec, x, rng);
    twin.truth.col(t) = x;
    for (int i = 0; i < d; ++i) {
      const double noise = r_diag(i) > 0 ? std::sqrt(r_diag(i)) * rng.normal() : 0.0;
      twin.obs(i, t - 1) = x(obs_pattern[i]) + noise;
    }
  }
  return twin;
}

TwinRun make_twin(const ModelSpec& spec, int cycles, const std::vector<int>& obs_pattern,
                  double r_value, std::uint64_t seed) {
  if (r_value < 0) throw Error("[models] make_twin: negative observation variance");
  return make_twin(spec, cycles, obs_pattern,
                   Vector::Constant(static_cast<Eigen::Index>(obs_pattern.size()), r_value),
                   seed);
}

void save_twin(const std::string& path, const TwinRun& twin) {
  BlockFile file;
  file.add_meta("kind", std::string("twin"));
  file.add_meta("seed", twin.seed);
  file.add_meta("cycles", static_cast<std::uint64_t>(twin.cycles()));
  file.add_block("truth", twin.truth);
  file.add_block("obs", twin.obs);
  Matrix sites(1, static_cast<Eigen::Index>(twin.obs_sites.size()));
  for (std::size_t i = 0; i < twin.obs_sites.size(); ++i)
    sites(0, static_cast<Eigen::Index>(i)) = twin.obs_sites[i];
  file.add_block("obs_sites", sites);
  file.add_block("r_diag", twin.r_diag);
  write_block_file(path, file);
}

TwinRun load_twin(const std::string& path) {
  const BlockFile file = read_block_file(path);
  TwinRun twin;
  twin.seed = std::stoull(file.meta_at("seed"));
  twin.truth = file.block_at("truth");
  twin.obs = file.block_at("obs");
  const Matrix& sites = file.block_at("obs_sites");
  twin.obs_sites.resize(sites.cols());
  for (Eigen::Index i = 0; i < sites.cols(); ++i)
    twin.obs_sites[static_cast<std::size_t>(i)] = static_cast<int>(sites(0, i));
  twin.r_diag = file.block_at("r_diag");
  return twin;
}

KalmanTrack kalman_oracle(const ModelSpec& spec, const TwinRun& twin, const Vector& m0,
                          const Matrix& p0) {
  spec.validate();
  if (spec.kind != ModelSpec::Kind::linear_gaussian)
    throw Error("[models] kalman_oracle: only defined for linear_gaussian models");

  const int q = spec.dim;
  const int d = static_cast<int>(twin.obs_sites.size());
  const int cycles = twin.cycles();

  KalmanTrack track;
  track.means.resize(q, cycles);
  track.covs.reserve(cycles);

  Vector m = m0;
  Matrix p = p0;
  const Matrix a = spec.transition.asDiagonal();
  const Matrix q_mat = spec.noise_var.asDiagonal();

  for (int t = 0; t < cycles; ++t) {
    // Predict.
    m = a * m;
    p = a * p * a.transpose() + q_mat;

    // Update with the point-selection observation operator.
    Matrix ph(q, d), hph(d, d);
    for (int i = 0; i < d; ++i) ph.col(i) = p.col(twin.obs_sites[i]);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) hph(i, j) = p(twin.obs_sites[i], twin.obs_sites[j]);
    const Matrix s = hph + Matrix(twin.r_diag.asDiagonal());
    const Matrix gain = ph * s.ldlt().solve(Matrix::Identity(d, d));

    Vector innov(d);
    for (int i = 0; i < d; ++i) innov(i) = twin.obs(i, t) - m(twin.obs_sites[i]);
    m += gain * innov;
    p -= gain * ph.transpose();
    p = 0.5 * (p + p.transpose());

    track.means.col(t) = m;
    track.covs.push_back(p);
  }
  return track;
}

Climatology climatology_stats(const ModelSpec& spec, int steps, std::uint64_t seed) {
  spec.validate();
  if (steps < 10) throw Error("[models] climatology_stats: too few steps");

  Rng rng(derive_seed(seed, 0x636c696du));
  Vector x(spec.dim);
  if (spec.kind == ModelSpec::Kind::lorenz96) {
    x.setConstant(spec.forcing);
    for (int i = 0; i < spec.dim; ++i) x(i) += 0.01 * rng.normal();
  } else {
    x.setZero();
  }

  const int discard = steps / 5;
  double sum = 0.0, sumsq = 0.0;
  long count = 0;
  for (int s = 0; s < steps; ++s) {
    x = single_step(spec, x, spec.kind == ModelSpec::Kind::linear_gaussian ? &rng : nullptr);
    if (s < discard) continue;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      sum += x(i);
      sumsq += x(i) * x(i);
      ++count;
    }
  }
  check_finite(x, "climatology_stats");
  Climatology clim;
  clim.mean = sum / count;
  clim.std = std::sqrt(std::max(0.0, sumsq / count - clim.mean * clim.mean));
  return clim;
}

double climatology_std(const ModelSpec& spec, int steps, std::uint64_t seed) {
  return climatology_stats(spec, steps, seed).std;
}

}  // namespace etkpf
