#include "etkpf/enspace.hpp"

#include <cmath>
#include <iostream>

namespace etkpf {

Ensemble::Ensemble(Matrix s) : states(std::move(s)) {
  if (size() < 2) throw Error("[enspace] Ensemble: need at least 2 members");
}

ObsBatch::ObsBatch(Vector y_in, Vector r_in, Matrix equivalents_in)
    : y(std::move(y_in)), r_diag(std::move(r_in)), equivalents(std::move(equivalents_in)) {
  if (r_diag.size() != y.size() || equivalents.rows() != y.size())
    throw Error("[enspace] ObsBatch: inconsistent dimensions");
  for (Eigen::Index i = 0; i < r_diag.size(); ++i)
    if (!(r_diag(i) > 0))
      throw Error("[enspace] ObsBatch: r_diag[" + std::to_string(i) + "] must be positive");
}

Matrix WeightSet::assemble() const {
  const int k = static_cast<int>(w_mu.rows());
  Matrix w(k, k);
  for (int j = 0; j < k; ++j) w.col(j) = w_mu.col(resample[j]);
  return w + w_eps;
}

SpectralCache build_cache(const Ensemble& ens, const ObsBatch& obs, const Vector& taper) {
  const int k = ens.size();
  SpectralCache cache;
  cache.k = k;

  const int d = obs.count();
  if (d == 0) {
    cache.spectrum.eigvecs = Matrix::Identity(k, k);
    cache.spectrum.eigvals = Vector::Zero(k);
    cache.c = Vector::Zero(k);
    return cache;
  }

  if (obs.members() != k) throw Error("[enspace] build_cache: equivalents/ensemble size mismatch");
  if (taper.size() != d) throw Error("[enspace] build_cache: taper length mismatch");
  for (Eigen::Index i = 0; i < d; ++i)
    if (taper(i) < 0.0 || taper(i) > 1.0)
      throw Error("[enspace] build_cache: taper factor outside [0,1]");

  const Vector ybar = obs.equivalents.rowwise().mean();
  const Matrix z = obs.equivalents.colwise() - ybar;     // HX^b
  const Vector w = (taper.array() / obs.r_diag.array()).matrix();  // tapered R^-1

  const Matrix s = z.transpose() * w.asDiagonal() * z;
  cache.c = z.transpose() * (w.asDiagonal() * (obs.y - ybar));
  cache.spectrum = sym_eig(s);

  // Clip eigenvalues that are zero up to round-off (1 is always a null
  // vector of S because the equivalents are centred).
  const double lmax = cache.spectrum.eigvals.size() > 0 ? cache.spectrum.eigvals(0) : 0.0;
  const double cut = 1e-12 * std::max(0.0, lmax);
  for (Eigen::Index i = 0; i < cache.spectrum.eigvals.size(); ++i)
    if (cache.spectrum.eigvals(i) < cut) cache.spectrum.eigvals(i) = 0.0;
  return cache;
}

SpectralCache build_cache(const Ensemble& ens, const ObsBatch& obs) {
  return build_cache(ens, obs, Vector::Ones(obs.count()));
}

namespace {

double denom(double lambda, double gamma, int k) {
  const double km1 = k - 1.0;
  return gamma * lambda * lambda + 2.0 * km1 * gamma * lambda + km1 * km1;
}

}  // namespace

double f_mu(double lambda, double gamma, int k) {
  const double km1 = k - 1.0;
  return (km1 * gamma * lambda + km1 * km1) / denom(lambda, gamma, k);
}

double f_mubar(double lambda, double gamma, int k) {
  const double km1 = k - 1.0;
  return (gamma + km1 * gamma * (1.0 - gamma) * lambda / denom(lambda, gamma, k)) /
         (km1 + gamma * lambda);
}

double f_gamma(double lambda, double gamma, int k) {
  return gamma * lambda / denom(lambda, gamma, k);
}

double f_alpha(double lambda, double gamma, int k) {
  const double km1 = k - 1.0;
  return km1 * km1 * (1.0 - gamma) / denom(lambda, gamma, k);
}

Matrix weight_mean_matrix(const SpectralCache& cache, double gamma) {
  const int k = cache.k;
  const Vector& l = cache.spectrum.eigvals;

  // f_mu - 1 = -gamma l (l + k-1) / denom, exactly zero when gamma = 0 or
  // l = 0, so the identity part never picks up eigenvector round-off.
  Vector fm1(l.size()), fmb(l.size());
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    const double km1 = k - 1.0;
    fm1(i) = -gamma * l(i) * (l(i) + km1) / denom(l(i), gamma, k);
    fmb(i) = f_mubar(l(i), gamma, k);
  }

  Matrix w = Matrix::Identity(k, k) + cache.spectrum.apply(fm1);
  const Vector mean_term = cache.spectrum.apply(fmb) * cache.c;
  w.noalias() += mean_term * Eigen::RowVectorXd::Ones(k);
  return w;
}

Vector pf_weights(const SpectralCache& cache, double gamma) {
  const int k = cache.k;
  const Vector& l = cache.spectrum.eigvals;

  Vector lfa(l.size()), fa(l.size());
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    fa(i) = f_alpha(l(i), gamma, k);
    lfa(i) = l(i) * fa(i);
  }
  const Matrix quad = cache.spectrum.apply(lfa);
  const Vector lin = cache.spectrum.apply(fa) * cache.c;

  Vector logw(k);
  for (int i = 0; i < k; ++i) logw(i) = -0.5 * quad(i, i) + lin(i);

  const double m = logw.maxCoeff();
  Vector alpha = (logw.array() - m).exp();
  const double total = alpha.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::cerr << "[enspace] pf_weights: degenerate exponents, falling back to uniform\n";
    return Vector::Constant(k, 1.0 / k);
  }
  return alpha / total;
}

Matrix analysis_cov_es(const SpectralCache& cache, double gamma) {
  const Vector& l = cache.spectrum.eigvals;
  Vector fg(l.size());
  for (Eigen::Index i = 0; i < l.size(); ++i) fg(i) = f_gamma(l(i), gamma, cache.k);
  return cache.spectrum.apply(fg);
}

Matrix stochastic_perturbations(const Matrix& p_tilde, const Matrix& e) {
  const int k = static_cast<int>(p_tilde.rows());
  if (e.rows() != k || e.cols() != k)
    throw Error("[enspace] stochastic_perturbations: E must be k x k");
  if (p_tilde.norm() == 0.0 || e.norm() == 0.0) return Matrix::Zero(k, k);

  const SymmetricSpectrum spec = sym_eig(p_tilde);
  Vector root(k);
  for (int i = 0; i < k; ++i) root(i) = std::sqrt(std::max(0.0, spec.eigvals(i)));

  const Matrix centered = e.colwise() - e.rowwise().mean().eval();  // E 1 = 0
  return spec.apply(root) * centered;
}

Matrix deterministic_perturbations(const Matrix& w_mu, const std::vector<int>& resample,
                                   const Matrix& p_tilde) {
  const int k = static_cast<int>(w_mu.rows());
  if (static_cast<int>(resample.size()) != k)
    throw Error("[enspace] deterministic_perturbations: resample length mismatch");

  Matrix c = (k - 1.0) * p_tilde;
  c = 0.5 * (c + c.transpose());
  if (c.norm() == 0.0) return Matrix::Zero(k, k);

  Matrix m(k, k);
  for (int j = 0; j < k; ++j) m.col(j) = w_mu.col(resample[j]);  // W^mu W^alpha
  const Vector row_mean = m.rowwise().mean();
  const Matrix a = m.colwise() - row_mean;  // centred: A 1 = 0

  return solve_care(CareProblem{a, c});
}

Ensemble assemble_and_apply(const Ensemble& ens, const WeightSet& ws) {
  const int k = ens.size();
  if (static_cast<int>(ws.w_mu.rows()) != k || static_cast<int>(ws.resample.size()) != k)
    throw Error("[enspace] assemble_and_apply: weight/ensemble size mismatch");

  Ensemble out;
  if (ws.gamma == 0.0) {
    // Pure particle-filter resample: copy members, no recomposition.
    out.states.resize(ens.dim(), k);
    for (int j = 0; j < k; ++j) out.states.col(j) = ens.states.col(ws.resample[j]);
    return out;
  }

  const Vector xbar = ens.mean();
  const Matrix dev = ens.deviations();
  out.states = (dev * ws.assemble()).colwise() + xbar;
  return out;
}

}  // namespace etkpf
