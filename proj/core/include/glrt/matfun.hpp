#pragma once

#include <Eigen/Dense>
#include <functional>

namespace glrt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Constraint set for the parameter matrix: all of R^{d1 x d2}, the
/// skew-symmetric subspace, or a nuclear-norm ball.  Closed, convex, and
/// closed under best rank-r approximation.
class ParamSpace {
 public:
  enum class Kind { Unconstrained, SkewSymmetric, NuclearBall };

  static ParamSpace unconstrained(int d1, int d2);
  static ParamSpace skew_symmetric(int d);
  static ParamSpace nuclear_ball(int d1, int d2, double radius);

  Kind kind() const { return kind_; }
  int rows() const { return d1_; }
  int cols() const { return d2_; }
  /// Nuclear radius; only meaningful for NuclearBall.
  double radius() const { return radius_; }

 private:
  ParamSpace(Kind kind, int d1, int d2, double radius)
      : kind_(kind), d1_(d1), d2_(d2), radius_(radius) {}
  Kind kind_;
  int d1_, d2_;
  double radius_;
};

/// Column-major stacking of a matrix into a vector.
Vector vec(const Matrix& a);
/// Inverse of vec for the given shape.
Matrix unvec(const Vector& v, int d1, int d2);

/// [[0, A], [A^T, 0]]: symmetric embedding whose spectrum is {+-sigma_i(A), 0...}.
Matrix hermitian_dilation(const Matrix& a);

/// Catoni influence function: log(1 + x + x^2/2) for x >= 0, odd extension
/// for x < 0.
double influence_psi(double x);

/// Applies f to the spectrum of a symmetric matrix: U diag(f(lambda)) U^T.
/// The input is symmetrized within a relative tolerance of 1e-10 and rejected
/// beyond it.
Matrix spectral_map(const std::function<double(double)>& f, const Matrix& m);

/// (1/nu) * psi(nu * dilation(A)) restricted to the top-right d1 x d2 block.
Matrix psi_tilde_nu(const Matrix& a, double nu);

/// SVD truncation keeping the r largest singular values.
Matrix best_rank_r(const Matrix& theta, int r);

/// Zeroes all singular values <= sigma_thres (inclusive).
Matrix svt_threshold(const Matrix& theta, double sigma_thres);

/// Number of singular values strictly above the threshold.
int svt_rank(const Matrix& theta, double sigma_thres);

/// Frobenius projection onto the given parameter space.
Matrix project_param_space(const Matrix& theta, const ParamSpace& omega);

/// Euclidean projection of v onto {w >= 0, sum w = total}.
Vector project_to_simplex(const Vector& v, double total = 1.0);

/// Rank by counting singular values above tol (relative to the largest).
int numerical_rank(const Matrix& theta, double tol = 1e-10);

double nuclear_norm(const Matrix& a);
double operator_norm(const Matrix& a);

}  // namespace glrt
