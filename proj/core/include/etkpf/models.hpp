#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etkpf/enspace.hpp"
#include "etkpf/rng.hpp"

namespace etkpf {

/**
 * @brief Toy dynamical system for twin experiments.
 *
 * lorenz96: dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F, integrated
 * with RK4, steps_per_cycle steps of size dt per assimilation cycle.
 * linear_gaussian: x' = diag(transition) x + N(0, diag(noise_var)).
 */
struct ModelSpec {
  enum class Kind { linear_gaussian, lorenz96 };
  Kind kind = Kind::lorenz96;
  int dim = 40;

  // lorenz96
  double forcing = 8.0;
  double dt = 0.005;
  int steps_per_cycle = 40;

  // linear_gaussian (diagonal transition and model noise)
  Vector transition;
  Vector noise_var;

  void validate() const;
};

/// One assimilation-cycle propagation, deterministic part only.
Vector step(const ModelSpec& spec, const Vector& state);

/// Propagation plus a model-noise draw (linear_gaussian only; lorenz96 is
/// a perfect model and ignores the stream).
Vector step_noisy(const ModelSpec& spec, const Vector& state, Rng& rng);

/**
 * @brief Synthetic truth trajectory with noisy observations.
 *
 * truth column t is the state at cycle t (column 0 = post-spin-up initial
 * state); obs column t-1 holds the observations assimilated at cycle t,
 * generated as truth[sites] + N(0, r_diag). Bit-reproducible from seed.
 */
struct TwinRun {
  Matrix truth;                ///< q x (cycles + 1)
  Matrix obs;                  ///< d x cycles
  std::vector<int> obs_sites;  ///< observed state indices
  Vector r_diag;               ///< length d observation error variances
  std::uint64_t seed = 0;

  int cycles() const { return static_cast<int>(obs.cols()); }
};

TwinRun make_twin(const ModelSpec& spec, int cycles, const std::vector<int>& obs_pattern,
                  const Vector& r_diag, std::uint64_t seed);
TwinRun make_twin(const ModelSpec& spec, int cycles, const std::vector<int>& obs_pattern,
                  double r_value, std::uint64_t seed);

/// Twin persistence: plain-text header plus row-major float64 payload.
void save_twin(const std::string& path, const TwinRun& twin);
TwinRun load_twin(const std::string& path);

/**
 * @brief Exact Kalman filter on a linear_gaussian twin.
 *
 * Posterior mean and covariance after assimilating each cycle's
 * observations, starting from N(m0, P0).
 */
struct KalmanTrack {
  Matrix means;              ///< q x cycles, posterior means
  std::vector<Matrix> covs;  ///< posterior covariances per cycle
};

KalmanTrack kalman_oracle(const ModelSpec& spec, const TwinRun& twin, const Vector& m0,
                          const Matrix& p0);

/// Pooled mean and standard deviation of a long free run, used as the
/// climatology scale for divergence checks, skill normalization and event
/// thresholds. `steps` are single integration steps (not cycles); the
/// first fifth is discarded.
struct Climatology {
  double mean = 0.0;
  double std = 0.0;
};

Climatology climatology_stats(const ModelSpec& spec, int steps, std::uint64_t seed);
double climatology_std(const ModelSpec& spec, int steps, std::uint64_t seed);

}  // namespace etkpf
