#pragma once

#include <cstdint>
#include <vector>

#include "etkpf/linalg.hpp"

namespace etkpf {

/**
 * @brief Result of one balanced resampling draw.
 *
 * indices[i] = j means analysis member i is built from component j.
 * Multiplicities stay strictly within one unit of their expected value
 * k * alpha_j, and identical (alpha, k, seed) inputs reproduce the plan
 * bit for bit.
 */
struct ResamplePlan {
  std::vector<int> indices;         ///< length k, entries in [0, k)
  std::vector<int> multiplicities;  ///< length k, N^j = #{i : indices[i] = j}
  std::uint64_t seed = 0;
};

/**
 * @brief Balanced (systematic residual) resampling.
 *
 * N^j = floor(k alpha_j) plus at most one residual unit, assigned by a
 * single stratified uniform draw from `seed`. Weights are renormalized if
 * their sum strays from 1 by round-off.
 */
ResamplePlan balanced_resample(const Vector& alpha, int k, std::uint64_t seed);

/// Equivalent sample size 1 / sum(alpha_i^2), in [1, k].
double ess(const Vector& alpha);

/**
 * @brief Relabels the index vector to maximize diagonal survivors.
 *
 * Every component j with N^j >= 1 is placed at its own slot (I[j] = j);
 * leftover copies fill the remaining slots in ascending index order. The
 * index multiset is preserved and the operation is idempotent.
 */
ResamplePlan permute_for_continuity(const ResamplePlan& plan);

}  // namespace etkpf
