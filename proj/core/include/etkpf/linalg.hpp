#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace etkpf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base error for all library failures; the message is tagged with the
/// module that raised it, e.g. "[linalg] ...".
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * @brief Spectral decomposition of a symmetric matrix, M = U diag(l) U'.
 *
 * Eigenvalues are sorted descending and the eigenvector columns follow the
 * same order, so index 0 is always the dominant direction.
 */
struct SymmetricSpectrum {
  Matrix eigvecs;  ///< orthogonal k x k matrix U, columns are eigenvectors
  Vector eigvals;  ///< length-k eigenvalues, descending

  int size() const { return static_cast<int>(eigvals.size()); }

  /// Reconstructs U diag(f(l)) U' for an already-evaluated vector f(l).
  Matrix apply(const Vector& f_of_eigvals) const {
    return eigvecs * f_of_eigvals.asDiagonal() * eigvecs.transpose();
  }
};

/**
 * @brief Data of the quadratic matrix equation A X + X A' + X X' = C.
 *
 * `c` must be symmetric positive semidefinite; the sought solution X is the
 * largest symmetric PSD root.
 */
struct CareProblem {
  Matrix a;
  Matrix c;
};

/// Per-solve diagnostics, filled on request by solve_care.
struct CareDiagnostics {
  int iterations = 0;
  double residual = 0.0;               ///< final ||AX+XA'+XX'-C||_F
  std::vector<double> lyapunov_residuals;  ///< per-iterate Lyapunov solve residuals (relative)
  bool deflated = false;               ///< true when the 1-vector null direction was removed
};

/**
 * @brief Symmetric eigendecomposition with descending eigenvalues.
 *
 * The input is symmetrized as (m + m')/2 before decomposing; asymmetry
 * beyond 1e-10 of its norm is an error.
 */
SymmetricSpectrum sym_eig(const Matrix& m);

/**
 * @brief Solves the Lyapunov-type equation F X + X F' = G.
 *
 * Bartels-Stewart style dense solve: complex Schur form of F, then back
 * substitution. Requires that no pair of eigenvalues of F sums to zero.
 * X is symmetrized when G is symmetric.
 */
Matrix solve_lyapunov(const Matrix& f, const Matrix& g);

/**
 * @brief Largest symmetric PSD solution of A X + X A' + X X' = C by Newton
 * iteration, each step a Lyapunov solve.
 *
 * Starts from X0 = beta*I with beta = ||A||_2 + sqrt(||C||_2), which
 * dominates the largest solution. Converged when both the relative
 * residual and the relative step size fall below tol. When the problem carries the analysis-ensemble structure
 * (A 1 = 0, 1'A = 0, 1'C 1 = 0) the known null direction is deflated
 * first, which restores quadratic convergence and enforces X 1 = 0.
 */
Matrix solve_care(const CareProblem& p, double tol = 1e-10, int max_iter = 50,
                  CareDiagnostics* diag = nullptr);

}  // namespace etkpf
