#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "etkpf/gamma.hpp"
#include "etkpf/linalg.hpp"
#include "etkpf/sampling.hpp"
#include "test_support.hpp"

using namespace etkpf;
using testing::random_matrix;
using testing::random_symmetric;

TEST_CASE("sym_eig identity") {
  const auto spec = sym_eig(Matrix::Identity(3, 3));
  for (int i = 0; i < 3; ++i) CHECK(spec.eigvals(i) == doctest::Approx(1.0));
  CHECK((spec.eigvecs.transpose() * spec.eigvecs - Matrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("sym_eig diagonal") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 2.0;
  const auto spec = sym_eig(m);
  CHECK(spec.eigvals(0) == doctest::Approx(2.0));
  CHECK(spec.eigvals(1) == doctest::Approx(0.0));
  CHECK(std::abs(spec.eigvecs(0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig reconstructs a random symmetric matrix") {
  Rng rng(11);
  const Matrix m = random_symmetric(rng, 5, 2.0);
  const auto spec = sym_eig(m);
  CHECK((spec.apply(spec.eigvals) - m).norm() < 1e-12 * m.norm());
  CHECK((spec.eigvecs.transpose() * spec.eigvecs - Matrix::Identity(5, 5)).norm() < 1e-12);
  CHECK(std::is_sorted(spec.eigvals.data(), spec.eigvals.data() + 5, std::greater<>()));
}

TEST_CASE("sym_eig rejects asymmetric input") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(sym_eig(m), Error);
}

TEST_CASE("lyapunov with f = I/2 returns g") {
  Rng rng(5);
  const Matrix g = random_symmetric(rng, 4);
  const Matrix x = solve_lyapunov(0.5 * Matrix::Identity(4, 4), g);
  CHECK((x - g).norm() < 1e-12 * g.norm());
}

TEST_CASE("lyapunov diagonal case, componentwise oracle") {
  Matrix f = Matrix::Zero(2, 2);
  f(0, 0) = 1.0;
  f(1, 1) = 2.0;
  Matrix g(2, 2);
  g << 2, 3, 3, 8;
  const Matrix x = solve_lyapunov(f, g);
  // X_ij = g_ij / (f_ii + f_jj)
  CHECK(x(0, 0) == doctest::Approx(1.0));
  CHECK(x(0, 1) == doctest::Approx(1.0));
  CHECK(x(1, 0) == doctest::Approx(1.0));
  CHECK(x(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("lyapunov residual on random stable problems") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 6;
    // Shift the spectrum right so no eigenvalue pair sums to zero.
    const Matrix f = random_matrix(rng, k, k) + 4.0 * Matrix::Identity(k, k);
    const Matrix g = random_symmetric(rng, k);
    const Matrix x = solve_lyapunov(f, g);
    CHECK((f * x + x * f.transpose() - g).norm() < 1e-10 * std::max(1.0, g.norm()));
    CHECK((x - x.transpose()).norm() < 1e-10 * std::max(1.0, x.norm()));
  }
}

TEST_CASE("lyapunov singular pencil is reported") {
  Matrix f = Matrix::Zero(2, 2);
  f(0, 0) = 1.0;
  f(1, 1) = -1.0;  // eigenvalue pair sums to zero
  const Matrix g = Matrix::Identity(2, 2);
  CHECK_THROWS_WITH_AS(solve_lyapunov(f, g),
                       doctest::Contains("eigenvalue pair sum"), Error);
}

TEST_CASE("care trivial solutions") {
  const Matrix zero = Matrix::Zero(3, 3);
  CHECK((solve_care({zero, Matrix::Identity(3, 3)}) - Matrix::Identity(3, 3)).norm() < 1e-10);
  CHECK((solve_care({zero, 4.0 * Matrix::Identity(3, 3)}) - 2.0 * Matrix::Identity(3, 3))
            .norm() < 1e-10);
  // A = I, C = 3I: per eigendirection x^2 + 2x - 3 = 0, positive root 1.
  CHECK((solve_care({Matrix::Identity(3, 3), 3.0 * Matrix::Identity(3, 3)}) -
         Matrix::Identity(3, 3))
            .norm() < 1e-10);
}

TEST_CASE("care degenerate C = 0 short-circuits") {
  Rng rng(3);
  const Matrix a = random_matrix(rng, 4, 4);
  CareDiagnostics diag;
  const Matrix x = solve_care({a, Matrix::Zero(4, 4)}, 1e-10, 50, &diag);
  CHECK(x.norm() == 0.0);
  CHECK(diag.iterations == 0);
}

TEST_CASE("care rejects bad inputs") {
  Matrix c(2, 2);
  c << 0, 1, 0, 0;
  CHECK_THROWS_AS(solve_care({Matrix::Zero(2, 2), c}), Error);  // asymmetric C
  Matrix neg = -Matrix::Identity(2, 2);
  CHECK_THROWS_AS(solve_care({Matrix::Zero(2, 2), neg}), Error);  // not PSD
}

TEST_CASE("care on analysis-structured problems: residual, symmetry, PSD, null vector,"
          " step count") {
  Rng rng(23);
  int worst_iters = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 3 + static_cast<int>(rng.uniform() * 8);  // 3..10
    const int q = 4 + static_cast<int>(rng.uniform() * 16);
    const int d = k + static_cast<int>(rng.uniform() * 6);
    const double gamma = 0.05 + 0.9 * rng.uniform();

    const auto inst = testing::random_instance(rng, q, d, k);
    const auto cache = build_cache(inst.ens, inst.obs);
    const Matrix w_mu = weight_mean_matrix(cache, gamma);
    const Vector alpha = pf_weights(cache, gamma);
    const auto plan = balanced_resample(alpha, k, rng.raw());

    Matrix m(k, k);
    for (int j = 0; j < k; ++j) m.col(j) = w_mu.col(plan.indices[j]);
    const Vector row_mean = m.rowwise().mean();
    const Matrix a = m.colwise() - row_mean;
    Matrix c = (k - 1.0) * analysis_cov_es(cache, gamma);
    c = 0.5 * (c + c.transpose());

    CareDiagnostics diag;
    const Matrix x = solve_care({a, c}, 1e-10, 50, &diag);

    const double res = (a * x + x * a.transpose() + x * x.transpose() - c).norm();
    CHECK(res <= 1e-10 * std::max(1.0, c.norm()));
    CHECK((x - x.transpose()).norm() <= 1e-12 * std::max(1.0, x.norm()));
    const Vector ev = sym_eig(x).eigvals;
    CHECK(ev.minCoeff() >= -1e-10 * std::max(1.0, x.norm()));
    CHECK((x * Vector::Ones(k)).norm() <= 1e-8);
    CHECK(diag.iterations <= 10);
    worst_iters = std::max(worst_iters, diag.iterations);

    // The Lyapunov residual identity must hold at every Newton iterate.
    for (const double lr : diag.lyapunov_residuals) CHECK(lr <= 1e-10);
  }
  MESSAGE("worst Newton iteration count: ", worst_iters);
}
