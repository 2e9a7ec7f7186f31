#pragma once

#include <optional>
#include <vector>

#include "glrt/glm.hpp"
#include "glrt/matfun.hpp"

namespace glrt {

/// Finite set of sensing matrices with operator norm <= 1 whose
/// vectorizations span R^{d1*d2} (validated at construction unless
/// `require_full_span` is disabled, e.g. for arm sets whose span is checked
/// against a subspace by the caller).
class ArmSet {
 public:
  explicit ArmSet(std::vector<Matrix> arms, bool require_full_span = true);

  int d1() const { return d1_; }
  int d2() const { return d2_; }
  std::size_t size() const { return arms_.size(); }
  const Matrix& arm(std::size_t a) const { return arms_[a]; }
  const std::vector<Matrix>& arms() const { return arms_; }
  /// vec(X_a), cached.
  const Vector& varm(std::size_t a) const { return vecs_[a]; }

 private:
  std::vector<Matrix> arms_;
  std::vector<Vector> vecs_;
  int d1_, d2_;
};

/// Probability weights over an arm set.
struct Design {
  Vector weights;                    ///< nonnegative, sums to 1 (tol 1e-12)
  std::vector<std::size_t> support;  ///< indices with weight > 0

  static Design uniform(std::size_t k);
  static Design point_mass(std::size_t k, std::size_t index);
  static Design from_weights(Vector w);

  void validate(std::size_t arm_count) const;
  /// Drops weights below `floor`, renormalizes, and rebuilds the support.
  void prune(double floor = 1e-12);
};

/// GL(pi) with its block families: the contiguous d1 x d1 diagonal blocks of
/// H^{-1} (one per column index) and the stride-d1 d2 x d2 blocks (one per
/// row index).  gl = max of the two block-sum top eigenvalues.
struct GlBreakdown {
  std::vector<Matrix> h_col_blocks;  ///< contiguous d1 x d1 blocks, d2 of them
  std::vector<Matrix> h_row_blocks;  ///< strided d2 x d2 blocks, d1 of them
  double stat_col = 0.0;             ///< lambda_max of the contiguous block sum
  double stat_row = 0.0;             ///< lambda_max of the strided block sum
  double gl = 0.0;                   ///< max(stat_col, stat_row)
};

struct SolverOptions {
  int max_iters = 5000;
  double tol = 1e-3;              ///< relative certificate gap target
  double weight_floor = 1e-12;    ///< support pruning threshold
  bool error_on_nonconvergence = true;
  double hessian_cond_limit = 1e12;
};

/// Convergence certificate attached to solver outputs.
struct SolverReport {
  int iterations = 0;
  bool converged = false;
  double certificate = 0.0;  ///< relative duality-gap-style stationarity gap
  double objective = 0.0;
};

struct DesignResult {
  Design design;
  SolverReport report;
};

/// V(pi) = sum_a pi_a vec(X_a) vec(X_a)^T.
Matrix design_matrix(const Design& pi, const ArmSet& arms);

/// H(pi; Theta) = sum_a pi_a mu'(<X_a, Theta>) vec(X_a) vec(X_a)^T.
Matrix hessian_matrix(const Design& pi, const ArmSet& arms, const GlmModel& model,
                      const Matrix& theta);

/// Inverts H(pi; Theta0) (condition number guard 1e12) and assembles the GL
/// block statistics.
GlBreakdown gl_objective(const Design& pi, const ArmSet& arms, const GlmModel& model,
                         const Matrix& theta0, double cond_limit = 1e12);

/// Maximizes lambda_min(V(pi)) over the simplex by projected supergradient
/// ascent with a Frank-Wolfe fallback; the certificate bounds the remaining
/// optimality gap.
DesignResult e_optimal_design(const ArmSet& arms, const SolverOptions& opts = {});

/// Sparse design pi with ||V(target) - V(pi)||_F <= eps, built by Frank-Wolfe
/// over the hull of {vec(X) vec(X)^T}.
struct CaratheodoryResult {
  Design design;
  double frobenius_error = 0.0;
  std::size_t support_bound = 0;  ///< min(K, ceil(c * diam^2 / eps^2)), c = 4
  int iterations = 0;
};
CaratheodoryResult approx_caratheodory(const Design& target, const ArmSet& arms, double eps);

/// E-optimal design, sparsified through the approximate Caratheodory step
/// when its support exceeds (d1*d2)^2.
DesignResult ecad(const ArmSet& arms, const SolverOptions& opts = {});

/// Minimizes GL(pi; Theta0) over the simplex by projected subgradient descent
/// from the uniform start with best-iterate tracking.
DesignResult gl_optimal_design(const ArmSet& arms, const GlmModel& model, const Matrix& theta0,
                               const SolverOptions& opts = {});

/// Subgradient of pi -> GL(pi; Theta0) at pi (exposed for finite-difference
/// validation).
Vector gl_subgradient(const Design& pi, const ArmSet& arms, const GlmModel& model,
                      const Matrix& theta0, double cond_limit = 1e12);

/// Worst-case curvature min_a mu'(<X_a, Theta>): an instance-difficulty
/// diagnostic, computable only when Theta is known (simulation).
double kappa_star(const ArmSet& arms, const GlmModel& model, const Matrix& theta);

/// Average curvature E_{X~pi}[mu'(<X, Theta>)].
double kappa_bar(const Design& pi, const ArmSet& arms, const GlmModel& model,
                 const Matrix& theta);

/// Symmetric PSD inverse with a condition-number guard.
Matrix invert_psd_guarded(const Matrix& h, double cond_limit = 1e12);

/// GL block statistics assembled from a precomputed H^{-1}.
GlBreakdown gl_breakdown_from_inverse(const Matrix& h_inv, int d1, int d2);

}  // namespace glrt
