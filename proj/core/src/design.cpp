#include "glrt/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "glrt/errors.hpp"

namespace glrt {

namespace {

constexpr double kOpNormSlack = 1e-9;

// Flat average of the eigen-projectors attached to eigenvalues within
// `mtol` of the extreme one.  Averaging over a near-degenerate eigenspace
// keeps sub/supergradients stable where lambda_min/lambda_max cross.
Matrix extreme_eigprojector(const Eigen::SelfAdjointEigenSolver<Matrix>& eig, bool largest,
                            double mtol) {
  const Vector& lam = eig.eigenvalues();  // ascending
  const Matrix& u = eig.eigenvectors();
  const Eigen::Index n = lam.size();
  const double pivot = largest ? lam(n - 1) : lam(0);
  Matrix proj = Matrix::Zero(n, n);
  int count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(lam(i) - pivot) <= mtol) {
      proj.noalias() += u.col(i) * u.col(i).transpose();
      ++count;
    }
  }
  return proj / static_cast<double>(count);
}

struct GlEval {
  GlBreakdown bd;
  Vector subgrad;  // empty unless requested
};

GlEval eval_gl(const Design& pi, const ArmSet& arms, const GlmModel& model, const Matrix& theta0,
               double cond_limit, bool want_subgrad) {
  Matrix h = hessian_matrix(pi, arms, model, theta0);
  Matrix m = invert_psd_guarded(h, cond_limit);

  const int d1 = arms.d1(), d2 = arms.d2();
  GlEval out;
  out.bd = gl_breakdown_from_inverse(m, d1, d2);

  if (!want_subgrad) return out;

  Matrix sum_col = Matrix::Zero(d1, d1);
  for (const Matrix& blk : out.bd.h_col_blocks) sum_col += blk;
  Matrix sum_row = Matrix::Zero(d2, d2);
  for (const Matrix& blk : out.bd.h_row_blocks) sum_row += blk;
  Eigen::SelfAdjointEigenSolver<Matrix> eig_col(sum_col);
  Eigen::SelfAdjointEigenSolver<Matrix> eig_row(sum_row);

  const double scale = std::max(std::abs(out.bd.gl), 1e-300);
  const double mtol = 1e-9 * scale;

  // chain rule through M(pi) = H(pi)^{-1}: d f = -<M W M, dH> with W the
  // block-placement of the top eigen-projector of the active block sum
  auto pullback = [&](const Matrix& w) {
    Matrix p = m * w * m;
    Vector g(arms.size());
    for (std::size_t a = 0; a < arms.size(); ++a) {
      const Vector& v = arms.varm(a);
      double zdot = model.mu_dot(arms.arm(a).cwiseProduct(theta0).sum());
      g(static_cast<Eigen::Index>(a)) = -zdot * v.dot(p * v);
    }
    return g;
  };

  auto grad_col = [&]() {
    Matrix rho = extreme_eigprojector(eig_col, /*largest=*/true, mtol);
    Matrix w = Matrix::Zero(d1 * d2, d1 * d2);
    for (int k = 0; k < d2; ++k) w.block(k * d1, k * d1, d1, d1) = rho;
    return pullback(w);
  };
  auto grad_row = [&]() {
    Matrix rho = extreme_eigprojector(eig_row, /*largest=*/true, mtol);
    Matrix w = Matrix::Zero(d1 * d2, d1 * d2);
    for (int k = 0; k < d1; ++k)
      for (int l = 0; l < d2; ++l)
        for (int lp = 0; lp < d2; ++lp) w(k + d1 * l, k + d1 * lp) = rho(l, lp);
    return pullback(w);
  };

  if (out.bd.stat_col - out.bd.stat_row > mtol) {
    out.subgrad = grad_col();
  } else if (out.bd.stat_row - out.bd.stat_col > mtol) {
    out.subgrad = grad_row();
  } else {
    out.subgrad = 0.5 * (grad_col() + grad_row());
  }
  return out;
}

}  // namespace

ArmSet::ArmSet(std::vector<Matrix> arms, bool require_full_span) : arms_(std::move(arms)) {
  if (arms_.empty()) raise(ErrorKind::EmptyData, "ArmSet: no arms");
  d1_ = static_cast<int>(arms_[0].rows());
  d2_ = static_cast<int>(arms_[0].cols());
  vecs_.reserve(arms_.size());
  for (const auto& a : arms_) {
    if (a.rows() != d1_ || a.cols() != d2_)
      raise(ErrorKind::ShapeMismatch, "ArmSet: arms have mixed shapes");
    if (operator_norm(a) > 1.0 + kOpNormSlack)
      raise(ErrorKind::BadConfig, "ArmSet: arm operator norm exceeds 1");
    vecs_.push_back(vec(a));
  }
  if (require_full_span) {
    Matrix stacked(static_cast<Eigen::Index>(arms_.size()), d1_ * d2_);
    for (std::size_t i = 0; i < arms_.size(); ++i) stacked.row(static_cast<Eigen::Index>(i)) = vecs_[i];
    Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
    if (qr.rank() < d1_ * d2_)
      raise(ErrorKind::SpanDeficient, "ArmSet: vectorized arms do not span the matrix space");
  }
}

Design Design::uniform(std::size_t k) {
  if (k == 0) raise(ErrorKind::EmptyData, "Design::uniform over zero arms");
  return from_weights(Vector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k)));
}

Design Design::point_mass(std::size_t k, std::size_t index) {
  if (index >= k) raise(ErrorKind::BadIndex, "Design::point_mass index out of range");
  Vector w = Vector::Zero(static_cast<Eigen::Index>(k));
  w(static_cast<Eigen::Index>(index)) = 1.0;
  return from_weights(std::move(w));
}

Design Design::from_weights(Vector w) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) < -1e-12) raise(ErrorKind::BadConfig, "Design: negative weight");
    if (w(i) < 0.0) w(i) = 0.0;
  }
  double total = w.sum();
  if (!(total > 0.0)) raise(ErrorKind::BadConfig, "Design: weights sum to zero");
  w /= total;
  Design d;
  d.weights = std::move(w);
  for (Eigen::Index i = 0; i < d.weights.size(); ++i)
    if (d.weights(i) > 0.0) d.support.push_back(static_cast<std::size_t>(i));
  return d;
}

void Design::validate(std::size_t arm_count) const {
  if (static_cast<std::size_t>(weights.size()) != arm_count)
    raise(ErrorKind::IndexMismatch, "Design: weight count does not match arm count");
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) < 0.0) raise(ErrorKind::BadConfig, "Design: negative weight");
    total += weights(i);
  }
  if (std::abs(total - 1.0) > 1e-12)
    raise(ErrorKind::BadConfig, "Design: weights do not sum to 1");
}

void Design::prune(double floor) {
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (weights(i) < floor) weights(i) = 0.0;
  double total = weights.sum();
  if (!(total > 0.0)) raise(ErrorKind::BadConfig, "Design: pruning removed all weight");
  weights /= total;
  support.clear();
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (weights(i) > 0.0) support.push_back(static_cast<std::size_t>(i));
}

Matrix design_matrix(const Design& pi, const ArmSet& arms) {
  pi.validate(arms.size());
  const int n = arms.d1() * arms.d2();
  Matrix v = Matrix::Zero(n, n);
  for (std::size_t a : pi.support)
    v.selfadjointView<Eigen::Lower>().rankUpdate(arms.varm(a), pi.weights(static_cast<Eigen::Index>(a)));
  return v.selfadjointView<Eigen::Lower>();
}

Matrix hessian_matrix(const Design& pi, const ArmSet& arms, const GlmModel& model,
                      const Matrix& theta) {
  pi.validate(arms.size());
  if (theta.rows() != arms.d1() || theta.cols() != arms.d2())
    raise(ErrorKind::ShapeMismatch, "hessian_matrix: theta shape does not match arms");
  const int n = arms.d1() * arms.d2();
  Matrix h = Matrix::Zero(n, n);
  for (std::size_t a : pi.support) {
    double z = arms.arm(a).cwiseProduct(theta).sum();
    h.selfadjointView<Eigen::Lower>().rankUpdate(
        arms.varm(a), pi.weights(static_cast<Eigen::Index>(a)) * model.mu_dot(z));
  }
  return h.selfadjointView<Eigen::Lower>();
}

double kappa_star(const ArmSet& arms, const GlmModel& model, const Matrix& theta) {
  if (theta.rows() != arms.d1() || theta.cols() != arms.d2())
    raise(ErrorKind::ShapeMismatch, "kappa_star: theta shape does not match arms");
  double out = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < arms.size(); ++a)
    out = std::min(out, model.mu_dot(arms.arm(a).cwiseProduct(theta).sum()));
  return out;
}

double kappa_bar(const Design& pi, const ArmSet& arms, const GlmModel& model,
                 const Matrix& theta) {
  pi.validate(arms.size());
  double out = 0.0;
  for (std::size_t a : pi.support)
    out += pi.weights(static_cast<Eigen::Index>(a)) *
           model.mu_dot(arms.arm(a).cwiseProduct(theta).sum());
  return out;
}

Matrix invert_psd_guarded(const Matrix& h, double cond_limit) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  const Vector& lam = eig.eigenvalues();
  const double lmin = lam(0), lmax = lam(lam.size() - 1);
  if (!(lmin > 0.0) || lmax / lmin > cond_limit)
    raise(ErrorKind::SingularHessian,
          "hessian condition number exceeds " + std::to_string(cond_limit));
  Vector inv_lam = lam.cwiseInverse();
  return eig.eigenvectors() * inv_lam.asDiagonal() * eig.eigenvectors().transpose();
}

GlBreakdown gl_breakdown_from_inverse(const Matrix& h_inv, int d1, int d2) {
  if (h_inv.rows() != static_cast<Eigen::Index>(d1) * d2 || h_inv.rows() != h_inv.cols())
    raise(ErrorKind::ShapeMismatch, "gl_breakdown_from_inverse: inverse has wrong shape");
  GlBreakdown bd;
  bd.h_col_blocks.reserve(d2);
  bd.h_row_blocks.reserve(d1);

  Matrix sum_col = Matrix::Zero(d1, d1);
  for (int k = 0; k < d2; ++k) {
    Matrix blk = h_inv.block(k * d1, k * d1, d1, d1);
    sum_col += blk;
    bd.h_col_blocks.push_back(std::move(blk));
  }
  Matrix sum_row = Matrix::Zero(d2, d2);
  for (int k = 0; k < d1; ++k) {
    Matrix blk(d2, d2);
    for (int l = 0; l < d2; ++l)
      for (int lp = 0; lp < d2; ++lp) blk(l, lp) = h_inv(k + d1 * l, k + d1 * lp);
    sum_row += blk;
    bd.h_row_blocks.push_back(std::move(blk));
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig_col(sum_col);
  Eigen::SelfAdjointEigenSolver<Matrix> eig_row(sum_row);
  bd.stat_col = eig_col.eigenvalues().maxCoeff();
  bd.stat_row = eig_row.eigenvalues().maxCoeff();
  bd.gl = std::max(bd.stat_col, bd.stat_row);
  return bd;
}

GlBreakdown gl_objective(const Design& pi, const ArmSet& arms, const GlmModel& model,
                         const Matrix& theta0, double cond_limit) {
  return eval_gl(pi, arms, model, theta0, cond_limit, /*want_subgrad=*/false).bd;
}

Vector gl_subgradient(const Design& pi, const ArmSet& arms, const GlmModel& model,
                      const Matrix& theta0, double cond_limit) {
  return eval_gl(pi, arms, model, theta0, cond_limit, /*want_subgrad=*/true).subgrad;
}

DesignResult e_optimal_design(const ArmSet& arms, const SolverOptions& opts) {
  const std::size_t k = arms.size();
  Design pi = Design::uniform(k);

  auto value_of = [&](const Vector& w) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(design_matrix(Design::from_weights(w), arms));
    return eig.eigenvalues()(0);
  };

  Design best = pi;
  double best_val = -std::numeric_limits<double>::infinity();
  double dual_ub = std::numeric_limits<double>::infinity();
  SolverReport rep;
  int stall = 0;
  int fw_clock = 0;

  for (int t = 1; t <= opts.max_iters; ++t) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(design_matrix(pi, arms));
    const double fval = eig.eigenvalues()(0);
    const double scale = std::max(std::abs(eig.eigenvalues().maxCoeff()), 1e-300);
    Matrix rho = extreme_eigprojector(eig, /*largest=*/false, 1e-9 * scale);

    Vector g(static_cast<Eigen::Index>(k));
    for (std::size_t a = 0; a < k; ++a) {
      const Vector& v = arms.varm(a);
      g(static_cast<Eigen::Index>(a)) = v.dot(rho * v);
    }
    // any density matrix rho gives max_a v'rho v >= lambda_min(V(pi')) for
    // every pi', so the running min is a valid upper bound on the optimum
    dual_ub = std::min(dual_ub, g.maxCoeff());

    if (fval > best_val) {
      best_val = fval;
      best = pi;
      stall = 0;
    } else {
      ++stall;
    }

    rep.iterations = t;
    rep.certificate = (dual_ub - best_val) / std::max(best_val, 1e-300);
    if (rep.certificate <= opts.tol) {
      rep.converged = true;
      break;
    }

    if (stall >= 50) {
      // Frank-Wolfe fallback: restart at the incumbent, then step toward
      // the most informative arm with a line-searched mixing weight
      if (stall == 50) pi = best;
      Eigen::Index s;
      g.maxCoeff(&s);
      Vector vertex = Vector::Zero(static_cast<Eigen::Index>(k));
      vertex(s) = 1.0;
      double gamma = 2.0 / (fw_clock + 2.0);
      ++fw_clock;
      double f_default = value_of((1.0 - gamma) * pi.weights + gamma * vertex);
      double f_half = value_of((1.0 - 0.5 * gamma) * pi.weights + 0.5 * gamma * vertex);
      if (f_half > f_default) gamma *= 0.5;
      pi = Design::from_weights((1.0 - gamma) * pi.weights + gamma * vertex);
      continue;
    }

    // non-monotone projected supergradient ascent: Polyak step toward the
    // dual bound, capped at the 1/sqrt(t) schedule
    double gnorm = g.norm();
    if (!(gnorm > 0.0)) break;
    double step = std::min((dual_ub - fval) / (gnorm * gnorm),
                           std::numbers::sqrt2 / (gnorm * std::sqrt(static_cast<double>(t))));
    if (!(step > 0.0)) step = std::numbers::sqrt2 / (gnorm * std::sqrt(static_cast<double>(t)));
    pi = Design::from_weights(project_to_simplex(pi.weights + step * g, 1.0));
  }

  best.prune(opts.weight_floor);
  Eigen::SelfAdjointEigenSolver<Matrix> eig_final(design_matrix(best, arms));
  rep.objective = eig_final.eigenvalues()(0);

  if (!rep.converged && opts.error_on_nonconvergence)
    raise(ErrorKind::NonConvergence,
          "e_optimal_design: certificate gap " + std::to_string(rep.certificate) +
              " above tolerance after " + std::to_string(rep.iterations) + " iterations");
  return {std::move(best), rep};
}

CaratheodoryResult approx_caratheodory(const Design& target, const ArmSet& arms, double eps) {
  if (!(eps > 0.0)) raise(ErrorKind::BadConfig, "approx_caratheodory: eps must be positive");
  target.validate(arms.size());
  const std::size_t k = arms.size();
  const Matrix t_mat = design_matrix(target, arms);

  // diam of {vec(X) vec(X)^T} for the reported support bound
  double diam2 = 0.0;
  if (k <= 512) {
    for (std::size_t a = 0; a < k; ++a) {
      Matrix ga = arms.varm(a) * arms.varm(a).transpose();
      for (std::size_t b = a + 1; b < k; ++b) {
        Matrix gb = arms.varm(b) * arms.varm(b).transpose();
        diam2 = std::max(diam2, (ga - gb).squaredNorm());
      }
    }
  } else {
    double max_norm = 0.0;
    for (std::size_t a = 0; a < k; ++a) max_norm = std::max(max_norm, arms.varm(a).squaredNorm());
    diam2 = 4.0 * max_norm * max_norm;
  }
  const double c_impl = 4.0;
  const std::size_t bound =
      std::min<std::size_t>(k, static_cast<std::size_t>(std::ceil(c_impl * diam2 / (eps * eps))));

  CaratheodoryResult out;
  out.support_bound = std::max<std::size_t>(bound, 1);

  // a target this sparse is its own best sparse approximation
  if (target.support.size() <= 2) {
    out.design = target;
    out.frobenius_error = 0.0;
    return out;
  }

  // Frank-Wolfe on 0.5 * ||V(w) - V(target)||_F^2 with exact line search;
  // start at the closest single vertex
  std::size_t first = 0;
  double first_dist = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < k; ++a) {
    Matrix ga = arms.varm(a) * arms.varm(a).transpose();
    double dist = (ga - t_mat).squaredNorm();
    if (dist < first_dist) {
      first_dist = dist;
      first = a;
    }
  }
  Vector w = Vector::Zero(static_cast<Eigen::Index>(k));
  w(static_cast<Eigen::Index>(first)) = 1.0;
  Matrix v = arms.varm(first) * arms.varm(first).transpose();

  const int cap = static_cast<int>(out.support_bound) * 4 + 64;
  double err = (v - t_mat).norm();
  int iters = 0;
  while (err > eps && iters < cap) {
    ++iters;
    Matrix resid = v - t_mat;  // gradient of the objective is <G_a, resid>
    double best_ip = std::numeric_limits<double>::infinity();
    std::size_t s = 0;
    for (std::size_t a = 0; a < k; ++a) {
      const Vector& va = arms.varm(a);
      double ip = va.dot(resid * va);
      if (ip < best_ip) {
        best_ip = ip;
        s = a;
      }
    }
    Matrix gs = arms.varm(s) * arms.varm(s).transpose();
    Matrix dir = gs - v;
    double denom = dir.squaredNorm();
    if (denom <= 0.0) break;
    double gamma = std::clamp(-(resid.cwiseProduct(dir)).sum() / denom, 0.0, 1.0);
    if (gamma <= 0.0) break;
    w *= (1.0 - gamma);
    w(static_cast<Eigen::Index>(s)) += gamma;
    v = (1.0 - gamma) * v + gamma * gs;
    err = (v - t_mat).norm();
  }

  out.design = Design::from_weights(w);
  out.design.prune();
  out.frobenius_error = (design_matrix(out.design, arms) - t_mat).norm();
  out.iterations = iters;
  if (out.frobenius_error > eps)
    raise(ErrorKind::Infeasible, "approx_caratheodory: could not reach the requested accuracy");
  return out;
}

DesignResult ecad(const ArmSet& arms, const SolverOptions& opts) {
  DesignResult e_opt = e_optimal_design(arms, opts);
  const std::size_t dim2 = static_cast<std::size_t>(arms.d1()) * arms.d2();
  if (e_opt.design.support.size() <= dim2 * dim2) return e_opt;
  const double eps = 1.0 / (2.0 * std::max(arms.d1(), arms.d2()));
  CaratheodoryResult sparse = approx_caratheodory(e_opt.design, arms, eps);
  DesignResult out;
  out.design = std::move(sparse.design);
  out.report = e_opt.report;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(design_matrix(out.design, arms));
  out.report.objective = eig.eigenvalues()(0);
  return out;
}

DesignResult gl_optimal_design(const ArmSet& arms, const GlmModel& model, const Matrix& theta0,
                               const SolverOptions& opts) {
  const std::size_t k = arms.size();
  Design pi = Design::uniform(k);

  // hold a vanishing floor of uniform mass so H(pi) stays invertible along
  // the way; the floor is far below the pruning threshold's relevance
  auto with_floor = [&](Vector w) {
    const double mix = 1e-10;
    w = (1.0 - mix) * w + Vector::Constant(w.size(), mix / static_cast<double>(k));
    return w;
  };
  auto value_of = [&](const Vector& w) {
    return eval_gl(Design::from_weights(w), arms, model, theta0, opts.hessian_cond_limit, false)
        .bd.gl;
  };

  Design best = pi;
  double best_val = std::numeric_limits<double>::infinity();
  double dual_lb = -std::numeric_limits<double>::infinity();
  SolverReport rep;

  // phase A: non-monotone projected subgradient with 1/sqrt(t) steps (the
  // exploration phase; subgradient methods must keep moving at kinks)
  const int phase_a = (2 * opts.max_iters) / 3;
  for (int t = 1; t <= phase_a; ++t) {
    GlEval ev = eval_gl(pi, arms, model, theta0, opts.hessian_cond_limit, /*want_subgrad=*/true);
    const double fval = ev.bd.gl;
    const Vector& g = ev.subgrad;

    // convexity: f(pi*) >= f(pi) + min_a g_a - <g, pi>
    dual_lb = std::max(dual_lb, fval + g.minCoeff() - g.dot(pi.weights));

    if (fval < best_val) {
      best_val = fval;
      best = pi;
    }

    rep.iterations = t;
    rep.certificate = (best_val - dual_lb) / std::max(best_val, 1e-300);
    if (rep.certificate <= opts.tol) {
      rep.converged = true;
      break;
    }

    double gnorm = g.norm();
    if (!(gnorm > 0.0)) break;
    double eta = std::min((fval - dual_lb) / (gnorm * gnorm),
                          std::numbers::sqrt2 / (gnorm * std::sqrt(static_cast<double>(t))));
    if (!(eta > 0.0)) eta = std::numbers::sqrt2 / (gnorm * std::sqrt(static_cast<double>(t)));
    pi = Design::from_weights(with_floor(project_to_simplex(pi.weights - eta * g, 1.0)));
  }

  // phase B: Frank-Wolfe refinement from the incumbent with line search;
  // the FW gap doubles as the stationarity certificate
  if (!rep.converged) {
    pi = best;
    for (int t = rep.iterations + 1; t <= opts.max_iters; ++t) {
      GlEval ev = eval_gl(pi, arms, model, theta0, opts.hessian_cond_limit, /*want_subgrad=*/true);
      const double fval = ev.bd.gl;
      const Vector& g = ev.subgrad;
      dual_lb = std::max(dual_lb, fval + g.minCoeff() - g.dot(pi.weights));
      if (fval < best_val) {
        best_val = fval;
        best = pi;
      }
      rep.iterations = t;
      rep.certificate = (best_val - dual_lb) / std::max(best_val, 1e-300);
      if (rep.certificate <= opts.tol) {
        rep.converged = true;
        break;
      }

      Eigen::Index s;
      g.minCoeff(&s);
      Vector vertex = Vector::Zero(static_cast<Eigen::Index>(k));
      vertex(s) = 1.0;
      // golden-section search on gamma in [0, 1/2]
      double lo = 0.0, hi = 0.5;
      const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
      double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
      auto mix_value = [&](double gamma) {
        return value_of(with_floor((1.0 - gamma) * pi.weights + gamma * vertex));
      };
      double f1 = mix_value(m1), f2 = mix_value(m2);
      for (int it = 0; it < 12; ++it) {
        if (f1 <= f2) {
          hi = m2;
          m2 = m1;
          f2 = f1;
          m1 = hi - gr * (hi - lo);
          f1 = mix_value(m1);
        } else {
          lo = m1;
          m1 = m2;
          f1 = f2;
          m2 = lo + gr * (hi - lo);
          f2 = mix_value(m2);
        }
      }
      double gamma = 0.5 * (lo + hi);
      double fc = mix_value(gamma);
      if (fc >= fval - 1e-14 * std::abs(fval)) break;  // no further FW progress
      pi = Design::from_weights(with_floor((1.0 - gamma) * pi.weights + gamma * vertex));
    }
  }

  best.prune(opts.weight_floor);
  // pruning can only move the objective marginally; report the pruned value
  GlEval ev_final = eval_gl(best, arms, model, theta0, opts.hessian_cond_limit, false);
  rep.objective = ev_final.bd.gl;

  if (!rep.converged && opts.error_on_nonconvergence)
    raise(ErrorKind::NonConvergence,
          "gl_optimal_design: certificate gap " + std::to_string(rep.certificate) +
              " above tolerance after " + std::to_string(rep.iterations) + " iterations");
  return {std::move(best), rep};
}

}  // namespace glrt
