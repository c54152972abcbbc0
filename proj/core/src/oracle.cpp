#include "etkpf/oracle.hpp"

#include <cmath>

namespace etkpf {

MixtureParams oracle_mixture(const Ensemble& ens, const ObsBatch& obs, double gamma) {
  const int q = ens.dim();
  const int k = ens.size();
  const int d = obs.count();
  if (q > 200 || d > 200)
    throw Error("[oracle] oracle_mixture: dense reference path limited to q,d <= 200");
  if (gamma < 0.0 || gamma > 1.0) throw Error("[oracle] oracle_mixture: gamma outside [0,1]");

  MixtureParams out;
  out.nu = ens.states;
  out.q_mat = Matrix::Zero(q, q);
  out.mu = ens.states;
  out.p_a = Matrix::Zero(q, q);
  out.alpha = Vector::Constant(k, 1.0 / k);
  if (d == 0) return out;

  const Matrix x_dev = ens.deviations();
  const Vector ybar = obs.equivalents.rowwise().mean();
  const Matrix z = obs.equivalents.colwise() - ybar;  // HX^b
  const Matrix r = obs.r_diag.asDiagonal();

  Matrix hk1 = Matrix::Zero(d, d);  // H K(gamma P^b)
  Matrix k1 = Matrix::Zero(q, d);   // K(gamma P^b)
  if (gamma > 0.0) {
    const double s = gamma / (k - 1.0);
    const Matrix m1 = s * (z * z.transpose()) + r;
    const Eigen::LDLT<Matrix> m1_ldlt(m1);
    if (m1_ldlt.info() != Eigen::Success)
      throw Error("[oracle] oracle_mixture: H P H' + R factorization failed");
    k1 = s * x_dev * z.transpose() * m1_ldlt.solve(Matrix::Identity(d, d));
    hk1 = s * z * z.transpose() * m1_ldlt.solve(Matrix::Identity(d, d));
  }

  const Matrix innov = (-obs.equivalents).colwise() + obs.y;  // y - H x^i per column
  out.nu = ens.states + k1 * innov;
  const Matrix h_nu = obs.equivalents + hk1 * innov;  // H nu^i per column

  Matrix qh = Matrix::Zero(q, d);   // Q H'
  Matrix hqh = Matrix::Zero(d, d);  // H Q H'
  if (gamma > 0.0) {
    out.q_mat = (1.0 / gamma) * k1 * r * k1.transpose();
    qh = (1.0 / gamma) * k1 * r * hk1.transpose();
    hqh = (1.0 / gamma) * hk1 * r * hk1.transpose();
  }

  Matrix k2 = Matrix::Zero(q, d);  // K((1-gamma) Q)
  if (gamma > 0.0 && gamma < 1.0) {
    const Matrix m2 = (1.0 - gamma) * hqh + r;
    const Eigen::LDLT<Matrix> m2_ldlt(m2);
    if (m2_ldlt.info() != Eigen::Success)
      throw Error("[oracle] oracle_mixture: H Q H' + R factorization failed");
    k2 = (1.0 - gamma) * qh * m2_ldlt.solve(Matrix::Identity(d, d));
  }

  const Matrix nu_innov = (-h_nu).colwise() + obs.y;  // y - H nu^i
  out.mu = out.nu + k2 * nu_innov;
  out.p_a = out.q_mat - k2 * qh.transpose();
  out.p_a = 0.5 * (out.p_a + out.p_a.transpose());

  // Mixing weights. At gamma = 1 the density covariance R/(1-gamma)
  // diverge and the weights are uniform; below 1 the normalizer is shared
  // by all components and drops out of the log-domain normalization.
  if (gamma < 1.0) {
    const Matrix sigma = hqh + r / (1.0 - gamma);
    const Eigen::LDLT<Matrix> sig_ldlt(sigma);
    Vector logw(k);
    for (int i = 0; i < k; ++i) {
      const Vector resid = nu_innov.col(i);
      logw(i) = -0.5 * resid.dot(sig_ldlt.solve(resid));
    }
    const Vector shifted = (logw.array() - logw.maxCoeff()).exp();
    out.alpha = shifted / shifted.sum();
  }
  return out;
}

}  // namespace etkpf
