#include "etkpf/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "etkpf/rng.hpp"

namespace etkpf {

ResamplePlan balanced_resample(const Vector& alpha, int k, std::uint64_t seed) {
  if (k <= 0) throw Error("[sampling] balanced_resample: k must be positive");
  const int n = static_cast<int>(alpha.size());
  if (n == 0) throw Error("[sampling] balanced_resample: empty weight vector");

  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    if (alpha(j) < 0.0) throw Error("[sampling] balanced_resample: negative weight");
    total += alpha(j);
  }
  if (!(total > 0.0)) throw Error("[sampling] balanced_resample: weights sum to zero");

  ResamplePlan plan;
  plan.seed = seed;
  plan.multiplicities.assign(n, 0);

  // Integer parts first, then one systematic draw over the residual line.
  std::vector<double> resid(n);
  int assigned = 0;
  for (int j = 0; j < n; ++j) {
    const double expected = k * alpha(j) / total;
    const int base = static_cast<int>(std::floor(expected));
    plan.multiplicities[j] = base;
    resid[j] = expected - base;
    assigned += base;
  }

  const int leftover = k - assigned;
  if (leftover > 0) {
    Rng rng(seed);
    const double u = rng.uniform();
    // Positions u, u+1, ..., u+leftover-1 on the cumulative residual line.
    // Each residual is < 1, so no component can catch two positions.
    double cum = 0.0;
    int next = 0;
    for (int j = 0; j < n && next < leftover; ++j) {
      cum += resid[j];
      while (next < leftover && u + next < cum) {
        ++plan.multiplicities[j];
        ++next;
      }
    }
    // Round-off can leave the last position just past the line's end.
    for (int j = n - 1; next < leftover && j >= 0; --j) {
      if (resid[j] > 0.0) {
        ++plan.multiplicities[j];
        ++next;
      }
    }
    if (next < leftover) throw Error("[sampling] balanced_resample: residual assignment failed");
  }

  plan.indices.reserve(k);
  for (int j = 0; j < n; ++j)
    for (int c = 0; c < plan.multiplicities[j]; ++c) plan.indices.push_back(j);
  return plan;
}

double ess(const Vector& alpha) {
  const double ss = alpha.squaredNorm();
  if (!(ss > 0.0)) throw Error("[sampling] ess: weights sum of squares is zero");
  return 1.0 / ss;
}

ResamplePlan permute_for_continuity(const ResamplePlan& plan) {
  const int k = static_cast<int>(plan.indices.size());
  ResamplePlan out;
  out.seed = plan.seed;
  out.multiplicities = plan.multiplicities;
  out.indices.assign(k, -1);

  std::vector<int> copies = plan.multiplicities;

  // Survivors take their own slot.
  for (int j = 0; j < k; ++j) {
    if (copies[j] >= 1) {
      out.indices[j] = j;
      --copies[j];
    }
  }
  // Leftover copies fill dead slots, both in ascending order.
  int slot = 0;
  for (int j = 0; j < k; ++j) {
    for (int c = 0; c < copies[j]; ++c) {
      while (slot < k && out.indices[slot] != -1) ++slot;
      out.indices[slot] = j;
    }
  }
  return out;
}

}  // namespace etkpf
