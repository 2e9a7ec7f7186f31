#include "glrt/matfun.hpp"

#include <algorithm>
#include <cmath>

#include "glrt/errors.hpp"

namespace glrt {

ParamSpace ParamSpace::unconstrained(int d1, int d2) {
  if (d1 < 1 || d2 < 1) raise(ErrorKind::BadConfig, "ParamSpace dims must be positive");
  return ParamSpace(Kind::Unconstrained, d1, d2, 0.0);
}

ParamSpace ParamSpace::skew_symmetric(int d) {
  if (d < 1) raise(ErrorKind::BadConfig, "ParamSpace dims must be positive");
  return ParamSpace(Kind::SkewSymmetric, d, d, 0.0);
}

ParamSpace ParamSpace::nuclear_ball(int d1, int d2, double radius) {
  if (d1 < 1 || d2 < 1) raise(ErrorKind::BadConfig, "ParamSpace dims must be positive");
  if (!(radius > 0.0)) raise(ErrorKind::BadConfig, "nuclear radius must be positive");
  return ParamSpace(Kind::NuclearBall, d1, d2, radius);
}

Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

Matrix unvec(const Vector& v, int d1, int d2) {
  if (v.size() != static_cast<Eigen::Index>(d1) * d2)
    raise(ErrorKind::ShapeMismatch, "unvec: vector length does not match d1*d2");
  return Eigen::Map<const Matrix>(v.data(), d1, d2);
}

Matrix hermitian_dilation(const Matrix& a) {
  const Eigen::Index d1 = a.rows(), d2 = a.cols();
  Matrix h = Matrix::Zero(d1 + d2, d1 + d2);
  h.topRightCorner(d1, d2) = a;
  h.bottomLeftCorner(d2, d1) = a.transpose();
  return h;
}

double influence_psi(double x) {
  if (!std::isfinite(x)) raise(ErrorKind::NonFinite, "influence_psi: non-finite input");
  if (x >= 0.0) return std::log1p(x + 0.5 * x * x);
  return -std::log1p(-x + 0.5 * x * x);
}

Matrix spectral_map(const std::function<double(double)>& f, const Matrix& m) {
  if (m.rows() != m.cols()) raise(ErrorKind::NotSymmetric, "spectral_map: matrix not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    raise(ErrorKind::NotSymmetric, "spectral_map: matrix not symmetric within tolerance");
  // symmetrize away floating-point drift before the eigendecomposition
  Matrix s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  Vector lam = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = f(lam(i));
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix psi_tilde_nu(const Matrix& a, double nu) {
  if (!(nu > 0.0)) raise(ErrorKind::BadConfig, "psi_tilde_nu: nu must be positive");
  const Eigen::Index d1 = a.rows(), d2 = a.cols();
  Matrix mapped = spectral_map([](double x) { return influence_psi(x); },
                               nu * hermitian_dilation(a));
  return (1.0 / nu) * mapped.block(0, d1, d1, d2);
}

Matrix best_rank_r(const Matrix& theta, int r) {
  const int dmin = static_cast<int>(std::min(theta.rows(), theta.cols()));
  if (r < 0 || r > dmin) raise(ErrorKind::BadRank, "best_rank_r: r out of range");
  if (r == 0) return Matrix::Zero(theta.rows(), theta.cols());
  Eigen::JacobiSVD<Matrix> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  for (Eigen::Index i = r; i < s.size(); ++i) s(i) = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Matrix svt_threshold(const Matrix& theta, double sigma_thres) {
  if (!(sigma_thres >= 0.0)) raise(ErrorKind::BadConfig, "svt_threshold: threshold must be >= 0");
  Eigen::JacobiSVD<Matrix> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) <= sigma_thres) s(i) = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

int svt_rank(const Matrix& theta, double sigma_thres) {
  Eigen::JacobiSVD<Matrix> svd(theta);
  const Vector& s = svd.singularValues();
  int k = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > sigma_thres) ++k;
  return k;
}

Vector project_to_simplex(const Vector& v, double total) {
  // sort-and-shift (Held et al.; Duchi et al. 2008)
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumsum += u[i];
    double t = (cumsum - total) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = std::max(v(i) - theta, 0.0);
  return out;
}

Matrix project_param_space(const Matrix& theta, const ParamSpace& omega) {
  if (theta.rows() != omega.rows() || theta.cols() != omega.cols())
    raise(ErrorKind::ShapeMismatch, "project_param_space: shape does not match the space");
  switch (omega.kind()) {
    case ParamSpace::Kind::Unconstrained:
      return theta;
    case ParamSpace::Kind::SkewSymmetric:
      return 0.5 * (theta - theta.transpose());
    case ParamSpace::Kind::NuclearBall: {
      Eigen::JacobiSVD<Matrix> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
      Vector s = svd.singularValues();
      if (s.sum() <= omega.radius()) return theta;
      Vector proj = project_to_simplex(s, omega.radius());
      return svd.matrixU() * proj.asDiagonal() * svd.matrixV().transpose();
    }
  }
  raise(ErrorKind::BadConfig, "project_param_space: unknown kind");
}

int numerical_rank(const Matrix& theta, double tol) {
  Eigen::JacobiSVD<Matrix> svd(theta);
  const Vector& s = svd.singularValues();
  if (s.size() == 0) return 0;
  const double cutoff = std::max(tol, tol * s(0));
  int k = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++k;
  return k;
}

double nuclear_norm(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().sum();
}

double operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

}  // namespace glrt
