#pragma once

#include <cstdint>

#include "etkpf/enspace.hpp"
#include "etkpf/rng.hpp"

namespace etkpf::testing {

inline Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline Matrix random_symmetric(Rng& rng, int n, double scale = 1.0) {
  const Matrix m = random_matrix(rng, n, n, scale);
  return 0.5 * (m + m.transpose());
}

struct Instance {
  Ensemble ens;
  ObsBatch obs;
};

/// Random linear-Gaussian analysis instance: random background ensemble,
/// random dense observation operator (used only to generate equivalents),
/// observation drawn near the ensemble so weights stay balanced.
inline Instance random_instance(Rng& rng, int q, int d, int k) {
  const Matrix states = random_matrix(rng, q, k);
  const Matrix h = random_matrix(rng, d, q, 1.0 / std::sqrt(double(q)));
  Vector r(d);
  for (int i = 0; i < d; ++i) r(i) = 0.5 + 1.5 * rng.uniform();
  const Matrix equivalents = h * states;
  Vector y = equivalents.rowwise().mean();
  for (int i = 0; i < d; ++i) y(i) += std::sqrt(r(i)) * rng.normal();

  Instance inst;
  inst.ens = Ensemble(states);
  inst.obs = ObsBatch(std::move(y), std::move(r), equivalents);
  return inst;
}

}  // namespace etkpf::testing
