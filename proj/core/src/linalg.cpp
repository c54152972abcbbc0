#include "etkpf/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

namespace etkpf {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

SymmetricSpectrum sym_eig(const Matrix& m) {
  if (m.rows() != m.cols())
    throw Error("[linalg] sym_eig: matrix is " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()) + ", expected square");
  const double asym = (m - m.transpose()).norm();
  if (asym > 1e-10 * std::max(1.0, m.norm()))
    throw Error("[linalg] sym_eig: input asymmetry " + fmt(asym) + " exceeds tolerance");

  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "[linalg] sym_eig: eigensolver failed to converge on a " << m.rows() << "x"
       << m.cols() << " matrix (norm " << fmt(sym.norm()) << ", max|entry| "
       << fmt(sym.cwiseAbs().maxCoeff()) << ")";
    throw Error(os.str());
  }

  // Eigen returns ascending order; flip to descending.
  const int k = static_cast<int>(m.rows());
  SymmetricSpectrum out;
  out.eigvals = solver.eigenvalues().reverse();
  out.eigvecs.resize(k, k);
  for (int i = 0; i < k; ++i) out.eigvecs.col(i) = solver.eigenvectors().col(k - 1 - i);
  return out;
}

Matrix solve_lyapunov(const Matrix& f, const Matrix& g) {
  const int k = static_cast<int>(f.rows());
  if (f.cols() != k || g.rows() != k || g.cols() != k)
    throw Error("[linalg] solve_lyapunov: dimension mismatch");

  using CMatrix = Eigen::MatrixXcd;
  Eigen::ComplexSchur<CMatrix> schur(f.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success)
    throw Error("[linalg] solve_lyapunov: Schur decomposition failed");
  const CMatrix& t = schur.matrixT();
  const CMatrix& q = schur.matrixU();

  // F = Q T Q*, F' = conj(Q) T' conj(Q)*.  With Y = Q* X conj(Q) the
  // equation becomes T Y + Y T' = Q* G conj(Q), solvable by back
  // substitution from the bottom-right corner because T is upper and T'
  // lower triangular.
  const CMatrix rhs = q.adjoint() * g * q.conjugate();
  const double scale = t.cwiseAbs().maxCoeff();

  CMatrix y = CMatrix::Zero(k, k);
  for (int i = k - 1; i >= 0; --i) {
    for (int j = k - 1; j >= 0; --j) {
      std::complex<double> acc = rhs(i, j);
      for (int m = i + 1; m < k; ++m) acc -= t(i, m) * y(m, j);
      for (int m = j + 1; m < k; ++m) acc -= y(i, m) * t(j, m);
      const std::complex<double> denom = t(i, i) + t(j, j);
      if (std::abs(denom) <= 1e-14 * std::max(1.0, scale))
        throw Error("[linalg] solve_lyapunov: singular pencil, eigenvalue pair sum " +
                    fmt(std::abs(denom)) + " near zero");
      y(i, j) = acc / denom;
    }
  }

  Matrix x = (q * y * q.transpose()).real();
  const double gsym = (g - g.transpose()).norm();
  if (gsym <= 1e-12 * std::max(1.0, g.norm())) x = 0.5 * (x + x.transpose());
  return x;
}

namespace {

double care_residual(const Matrix& a, const Matrix& c, const Matrix& x) {
  return (a * x + x * a.transpose() + x * x.transpose() - c).norm();
}

/// Step length minimizing the residual along a Newton step. The Newton
/// direction satisfies F(X + t D) = (1-t) F(X) + t^2 D D', so the squared
/// residual is the quartic (1-t)^2 a0 + 2 t^2 (1-t) b0 + t^4 c0; sample it
/// on [0.2, 2] (1 included, so the result is never worse than the plain
/// step).
double residual_line_search(const Matrix& f_res, const Matrix& d) {
  const Matrix dd = d * d.transpose();
  const double a0 = f_res.squaredNorm();
  const double b0 = f_res.cwiseProduct(dd).sum();
  const double c0 = dd.squaredNorm();
  double best_t = 1.0;
  double best = c0;  // phi(1)
  for (int i = 0; i <= 360; ++i) {
    const double t = 0.2 + i * 0.005;
    const double omt = 1.0 - t;
    const double phi = omt * omt * a0 + 2.0 * t * t * omt * b0 + t * t * t * t * c0;
    if (phi < best) {
      best = phi;
      best_t = t;
    }
  }
  return best_t;
}

/// Top |eigenvalue| eigendirection of a symmetric matrix.
Vector dominant_direction(const Matrix& sym) {
  const SymmetricSpectrum spec = sym_eig(0.5 * (sym + sym.transpose()));
  int top = 0;
  for (int i = 1; i < spec.size(); ++i)
    if (std::abs(spec.eigvals(i)) > std::abs(spec.eigvals(top))) top = i;
  return spec.eigvecs.col(top);
}

/// Rank-one residual polish along u u': minimizes ||F(X + s u u')||_F over
/// the scalar s. Pure matrix algebra, no Lyapunov solve. Near-singular
/// directions stall Newton (error halving per step); the step itself is
/// then rank-one and this search removes the whole error at once. Ties are
/// broken toward the largest s, which selects the PSD root of the local
/// quadratic.
bool rank_one_polish(const Matrix& a, const Matrix& c, const Vector& u, Matrix& x,
                     double& res) {
  const Matrix m = a + x;
  const Matrix f_res = a * x + x * a.transpose() + x * x.transpose() - c;
  const Matrix uu = u * u.transpose();
  const Matrix b = m * uu + uu * m.transpose();

  // phi(s) = ||F + s B + s^2 uu'||^2, a quartic in s.
  const double c0 = f_res.squaredNorm();
  const double c1 = 2.0 * f_res.cwiseProduct(b).sum();
  const double c2 = b.squaredNorm() + 2.0 * f_res.cwiseProduct(uu).sum();
  const double c3 = 2.0 * b.cwiseProduct(uu).sum();
  const double range = 2.0 * std::sqrt(std::sqrt(c0));
  double s_best = 0.0, phi_best = c0;
  for (int i = 2000; i >= -2000; --i) {
    const double s = range * i / 2000.0;
    const double phi = c0 + s * (c1 + s * (c2 + s * (c3 + s)));
    if (phi < phi_best) {
      phi_best = phi;
      s_best = s;
    }
  }
  if (s_best == 0.0) return false;
  const Matrix candidate = x + s_best * uu;
  const double cand_res = care_residual(a, c, candidate);
  if (cand_res >= 0.5 * res) return false;
  x = candidate;
  res = cand_res;
  return true;
}

/// Newton iteration for A X + X A' + X X' = C from X0 = beta*I, one
/// Lyapunov solve per step. With `accelerate`, the head phase takes
/// residual-optimal step lengths and a detected singular tail gets one
/// double step; the quadratic tail always uses plain steps.
Matrix care_newton(const Matrix& a, const Matrix& c, double tol, int max_iter,
                   CareDiagnostics* diag, bool accelerate) {
  const int k = static_cast<int>(a.rows());
  const double c_norm = c.norm();
  const double res_scale = std::max(1.0, c_norm);

  if (c_norm == 0.0) {
    if (diag) diag->iterations = 0;
    return Matrix::Zero(k, k);
  }

  // beta must dominate ||X*||_2 (largest-solution bound
  // ||X||_2 <= ||A||_2 + sqrt(||A||_2^2 + ||C||_2)); spectral norms keep
  // the initial halving phase short where Frobenius norms overshoot by
  // sqrt(k).
  const double a_2norm = Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
  const double c_2norm = std::abs(sym_eig(c).eigvals(0));
  const double beta = a_2norm + std::sqrt(c_2norm);
  Matrix x = beta * Matrix::Identity(k, k);
  double res = care_residual(a, c, x);

  for (int it = 1; it <= max_iter; ++it) {
    const Matrix f = a + x;
    const Matrix g = x * x.transpose() + c;
    Matrix x_next;
    try {
      x_next = solve_lyapunov(f, g);
    } catch (const Error& e) {
      throw Error(std::string(e.what()) + " (during Newton iteration " + std::to_string(it) +
                  ")");
    }
    x_next = 0.5 * (x_next + x_next.transpose());

    if (diag) {
      const double lyap_res = (f * x_next + x_next * f.transpose() - g).norm() /
                              std::max(1.0, g.norm());
      diag->lyapunov_residuals.push_back(lyap_res);
    }

    Matrix d = x_next - x;
    if (accelerate && res > 0.1 * res_scale) {
      // Head phase: residual-optimal step length shortens the initial
      // geometric decay from beta*I.
      const Matrix f_res = a * x + x * a.transpose() + x * x.transpose() - c;
      const double t = residual_line_search(f_res, d);
      x_next = x + t * d;
      d = t * d;
    }

    const double step = d.norm() / std::max(1.0, x.norm());
    x = x_next;
    res = care_residual(a, c, x);

    // Tail phase: polish along the step's (then the residual's) dominant
    // direction. Near-singular directions of the derivative reduce Newton
    // to error halving; the polish removes such an error mode outright.
    if (accelerate && res > tol * res_scale && res <= 5e-2 * res_scale) {
      if (rank_one_polish(a, c, dominant_direction(d), x, res) && res > tol * res_scale) {
        const Matrix f_res = a * x + x * a.transpose() + x * x.transpose() - c;
        rank_one_polish(a, c, dominant_direction(f_res), x, res);
      }
    }
    if (diag) {
      diag->iterations = it;
      diag->residual = res;
    }
    // Quadratic convergence usually lands far below tol; once the residual
    // is two orders past it the step test carries no information.
    if (res <= tol * res_scale && (step <= tol || res <= 0.01 * tol * res_scale)) return x;
  }

  throw Error("[linalg] solve_care: no convergence in " + std::to_string(max_iter) +
              " iterations, final residual " + fmt(res) + " (tolerance " +
              fmt(tol * res_scale) + ")");
}

/// Runs the accelerated iteration and verifies the PSD property that
/// identifies the largest solution; falls back to plain Newton (for which
/// monotone convergence from beta*I is guaranteed) if the shortcut landed
/// elsewhere.
Matrix care_newton_checked(const Matrix& a, const Matrix& c, double tol, int max_iter,
                           CareDiagnostics* diag) {
  try {
    CareDiagnostics fast;
    const Matrix x = care_newton(a, c, tol, max_iter, &fast, true);
    const double min_eig = x.norm() == 0.0 ? 0.0 : sym_eig(x).eigvals.minCoeff();
    if (min_eig >= -1e-10 * std::max(1.0, x.norm())) {
      if (diag) *diag = fast;
      return x;
    }
  } catch (const Error&) {
    // fall through to the plain iteration
  }
  return care_newton(a, c, tol, max_iter, diag, false);
}

}  // namespace

Matrix solve_care(const CareProblem& p, double tol, int max_iter, CareDiagnostics* diag) {
  const Matrix& a = p.a;
  const Matrix& c = p.c;
  const int k = static_cast<int>(a.rows());
  if (a.cols() != k || c.rows() != k || c.cols() != k)
    throw Error("[linalg] solve_care: dimension mismatch");
  if (tol <= 0) throw Error("[linalg] solve_care: tol must be positive");

  const double c_asym = (c - c.transpose()).norm();
  if (c_asym > 1e-12 * std::max(1.0, c.norm()))
    throw Error("[linalg] solve_care: C asymmetry " + fmt(c_asym) + " exceeds tolerance");
  {
    const Vector ev = sym_eig(c).eigvals;
    if (ev.size() > 0 && ev.minCoeff() < -1e-10 * std::max(1.0, c.norm()))
      throw Error("[linalg] solve_care: C is not PSD, min eigenvalue " + fmt(ev.minCoeff()));
  }

  if (c.norm() == 0.0) {
    if (diag) *diag = CareDiagnostics{};
    return Matrix::Zero(k, k);
  }

  // Analysis-ensemble problems have 1 in the common null space of A, A'
  // and C (appendix structure); Newton's derivative is singular along that
  // direction and converges only linearly there. Removing it up front
  // keeps the iteration quadratic and makes X1 = 0 exact.
  const Vector ones = Vector::Ones(k);
  const double a_scale = std::max(1.0, a.norm());
  const double c_scale = std::max(1.0, c.norm());
  const bool nullable = k >= 2 && (a * ones).norm() <= 1e-8 * a_scale * std::sqrt(double(k)) &&
                        (a.transpose() * ones).norm() <= 1e-8 * a_scale * std::sqrt(double(k)) &&
                        std::abs(ones.dot(c * ones)) <= 1e-8 * c_scale * double(k);

  if (!nullable) return care_newton_checked(a, c, tol, max_iter, diag);

  // Orthonormal basis of the complement of 1: Householder reflector of
  // e1 -> 1/sqrt(k), columns 2..k. Deterministic.
  Matrix h = Matrix::Identity(k, k);
  {
    Vector v = ones / std::sqrt(double(k));
    v(0) -= 1.0;
    const double vn = v.norm();
    if (vn > 0) {
      v /= vn;
      h -= 2.0 * v * v.transpose();
    }
  }
  const Matrix basis = h.rightCols(k - 1);  // k x (k-1), orthonormal, basis'*1 = 0

  CareDiagnostics local;
  const Matrix a_red = basis.transpose() * a * basis;
  Matrix c_red = basis.transpose() * c * basis;
  c_red = 0.5 * (c_red + c_red.transpose());
  const Matrix x_red = care_newton_checked(a_red, c_red, tol, max_iter, diag ? &local : nullptr);
  Matrix x = basis * x_red * basis.transpose();
  x = 0.5 * (x + x.transpose());
  if (diag) {
    *diag = local;
    diag->deflated = true;
    diag->residual = care_residual(a, c, x);
  }
  return x;
}

}  // namespace etkpf
