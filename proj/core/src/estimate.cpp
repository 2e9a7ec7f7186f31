#include "glrt/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>

#include "glrt/errors.hpp"

namespace glrt {

namespace {

// Sufficient statistics per distinct sensing matrix: the GLM likelihood
// depends on the responses only through their per-arm count and sum.
struct GroupedData {
  std::vector<Matrix> xs;
  std::vector<double> counts;
  std::vector<double> ysums;
  double n = 0.0;
};

GroupedData group_by_arm(const Dataset& data) {
  GroupedData g;
  std::map<std::string, std::size_t> index;
  for (const auto& obs : data) {
    std::string key(reinterpret_cast<const char*>(obs.x.data()),
                    sizeof(double) * static_cast<std::size_t>(obs.x.size()));
    auto [it, inserted] = index.try_emplace(key, g.xs.size());
    if (inserted) {
      g.xs.push_back(obs.x);
      g.counts.push_back(0.0);
      g.ysums.push_back(0.0);
    }
    g.counts[it->second] += 1.0;
    g.ysums[it->second] += obs.y;
  }
  g.n = static_cast<double>(data.size());
  return g;
}

double grouped_nll(const GlmModel& model, const GroupedData& g, const Matrix& theta) {
  double total = 0.0;
  for (std::size_t i = 0; i < g.xs.size(); ++i) {
    double z = g.xs[i].cwiseProduct(theta).sum();
    total += g.counts[i] * model.m(z) - g.ysums[i] * z;
  }
  return total / (g.n * model.g_tau());
}

Matrix grouped_nll_gradient(const GlmModel& model, const GroupedData& g, const Matrix& theta) {
  Matrix grad = Matrix::Zero(theta.rows(), theta.cols());
  for (std::size_t i = 0; i < g.xs.size(); ++i) {
    double z = g.xs[i].cwiseProduct(theta).sum();
    grad += (g.counts[i] * model.mu(z) - g.ysums[i]) * g.xs[i];
  }
  return grad / (g.n * model.g_tau());
}

Matrix svt_soft(const Matrix& a, double tau) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::max(s(i) - tau, 0.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace

double lambda_selection(const GlmModel& model, double delta, int d1, int d2, long long n,
                        const LambdaCase& lcase) {
  if (!(delta > 0.0 && delta < 1.0)) raise(ErrorKind::BadConfidence, "delta must lie in (0,1)");
  if (n < 1) raise(ErrorKind::BadConfig, "lambda_selection: N must be >= 1");
  const double g = model.g_tau();
  const double v = std::log(2.0 * std::max(d1, d2)) + std::min(d1, d2) * std::log(5.0 / delta);

  double f = 0.0;
  switch (lcase.kind) {
    case LambdaCase::Kind::Bounded: {
      if (model.kind() != GlmModel::Kind::Bernoulli)
        raise(ErrorKind::CaseMismatch, "bounded-residual case requires a Bernoulli model");
      if (!(lcase.r_max > 0.0)) raise(ErrorKind::BadConfig, "bounded case needs R_max > 0");
      f = std::sqrt(8.0 * lcase.r_max / g * std::log((d1 + d2) / delta));
      break;
    }
    case LambdaCase::Kind::SubGaussian: {
      if (model.kind() == GlmModel::Kind::Poisson)
        raise(ErrorKind::CaseMismatch, "subgaussian case does not cover Poisson");
      if (!(lcase.value > 0.0)) raise(ErrorKind::BadConfig, "subgaussian case needs sigma > 0");
      f = 16.0 * std::numbers::pi * lcase.value / g * std::sqrt(v);
      break;
    }
    case LambdaCase::Kind::Poisson: {
      if (model.kind() != GlmModel::Kind::Poisson)
        raise(ErrorKind::CaseMismatch, "poisson case requires a Poisson model");
      const double r = lcase.r_max;
      if (!(r > 1.0)) raise(ErrorKind::BadConfig, "poisson case needs R_max > 1");
      if (r > std::numbers::e) {
        double a = 1.0 - 2.0 / r;
        double g1 = 0.5 * a * (r + 2.0 * std::log(r) + 2.0 * std::log(2.0 * a / std::numbers::e)) +
                    4.0 * r * std::log(r);
        f = g1 + 4.0 / a * v;
      } else {
        double g2 = 0.125 * (r + 4.0 * std::log(r) + 4.0 * std::log(8.0 + 2.0 * r)) +
                    4.0 * r * std::log(r);
        f = g2 + 8.0 * v;
      }
      break;
    }
  }
  return f * std::sqrt(1.0 / static_cast<double>(n));
}

Matrix stage1_nuclear_mle(const Dataset& data, const GlmModel& model, const StageIConfig& cfg,
                          StageIDiagnostics* diag) {
  if (data.empty()) raise(ErrorKind::EmptyData, "stage1_nuclear_mle: no observations");
  if (!(cfg.lambda > 0.0)) raise(ErrorKind::BadConfig, "stage1_nuclear_mle: lambda must be > 0");
  const int d1 = static_cast<int>(data.front().x.rows());
  const int d2 = static_cast<int>(data.front().x.cols());
  if (d1 != cfg.omega.rows() || d2 != cfg.omega.cols())
    raise(ErrorKind::ShapeMismatch, "stage1_nuclear_mle: data shape does not match omega");
  for (const auto& obs : data)
    if (obs.x.rows() != d1 || obs.x.cols() != d2)
      raise(ErrorKind::ShapeMismatch, "stage1_nuclear_mle: mixed observation shapes");

  GroupedData g = group_by_arm(data);

  auto objective = [&](const Matrix& th) {
    return grouped_nll(model, g, th) + cfg.lambda * nuclear_norm(th);
  };

  Matrix x = project_param_space(Matrix::Zero(d1, d2), cfg.omega);
  Matrix x_prev = x;
  Matrix y = x;
  double t_momentum = 1.0;
  double lips = 1.0;
  double fx = objective(x);

  StageIDiagnostics local;
  local.objective_trace.push_back(fx);

  Matrix best = x;
  double best_f = fx;

  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    Matrix grad_y = grouped_nll_gradient(model, g, y);
    double smooth_y = grouped_nll(model, g, y);

    // backtracking line search on the smooth part's local Lipschitz constant
    Matrix cand;
    double smooth_cand = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      cand = project_param_space(svt_soft(y - grad_y / lips, cfg.lambda / lips), cfg.omega);
      smooth_cand = grouped_nll(model, g, cand);
      Matrix diff = cand - y;
      double quad = smooth_y + grad_y.cwiseProduct(diff).sum() + 0.5 * lips * diff.squaredNorm();
      if (smooth_cand <= quad + 1e-15 * std::abs(quad)) break;
      lips *= 2.0;
    }

    double f_cand = smooth_cand + cfg.lambda * nuclear_norm(cand);
    if (f_cand > fx) {
      // momentum restart; plain proximal step from the last accepted iterate
      t_momentum = 1.0;
      y = x;
      grad_y = grouped_nll_gradient(model, g, y);
      smooth_y = grouped_nll(model, g, y);
      for (int bt = 0; bt < 60; ++bt) {
        cand = project_param_space(svt_soft(y - grad_y / lips, cfg.lambda / lips), cfg.omega);
        smooth_cand = grouped_nll(model, g, cand);
        Matrix diff = cand - y;
        double quad = smooth_y + grad_y.cwiseProduct(diff).sum() + 0.5 * lips * diff.squaredNorm();
        if (smooth_cand <= quad + 1e-15 * std::abs(quad)) break;
        lips *= 2.0;
      }
      f_cand = smooth_cand + cfg.lambda * nuclear_norm(cand);
      if (f_cand > fx) break;  // no further descent available
    }

    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    y = cand + ((t_momentum - 1.0) / t_next) * (cand - x);
    t_momentum = t_next;
    x_prev = x;
    x = cand;

    double rel_drop = (fx - f_cand) / std::max(std::abs(fx), 1e-300);
    fx = f_cand;
    local.objective_trace.push_back(fx);
    if (fx < best_f) {
      best_f = fx;
      best = x;
    }
    lips *= 0.9;  // allow the local constant to shrink again

    if (rel_drop < cfg.tol) {
      local.converged = true;
      ++iter;
      break;
    }
  }
  local.iterations = iter;
  if (diag) *diag = std::move(local);
  return best;
}

Matrix one_sample_estimator(const Matrix& x, double y, const Matrix& theta0, const Matrix& h_inv,
                            const GlmModel& model) {
  if (x.rows() != theta0.rows() || x.cols() != theta0.cols())
    raise(ErrorKind::ShapeMismatch, "one_sample_estimator: X and Theta0 differ in shape");
  if (h_inv.rows() != x.size() || h_inv.cols() != x.size())
    raise(ErrorKind::ShapeMismatch, "one_sample_estimator: H^{-1} has wrong dimensions");
  double resid = y - model.mu(x.cwiseProduct(theta0).sum());
  Vector v = h_inv * (resid * vec(x));
  return unvec(v, static_cast<int>(x.rows()), static_cast<int>(x.cols()));
}

Matrix catoni_aggregate(const std::vector<Matrix>& samples, double nu) {
  if (samples.empty()) raise(ErrorKind::EmptySamples, "catoni_aggregate: no samples");
  std::vector<double> w(samples.size(), 1.0);
  return catoni_aggregate_weighted(samples, w, static_cast<double>(samples.size()), nu);
}

Matrix catoni_aggregate_weighted(const std::vector<Matrix>& samples,
                                 const std::vector<double>& weights, double n_total, double nu) {
  if (samples.empty()) raise(ErrorKind::EmptySamples, "catoni_aggregate_weighted: no samples");
  if (samples.size() != weights.size())
    raise(ErrorKind::IndexMismatch, "catoni_aggregate_weighted: weight count mismatch");
  if (!(nu > 0.0)) raise(ErrorKind::BadConfig, "catoni_aggregate_weighted: nu must be > 0");
  Matrix acc = Matrix::Zero(samples.front().rows(), samples.front().cols());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].rows() != acc.rows() || samples[i].cols() != acc.cols())
      raise(ErrorKind::ShapeMismatch, "catoni_aggregate_weighted: mixed sample shapes");
    acc += weights[i] * psi_tilde_nu(samples[i], nu);
  }
  return acc / n_total;
}

namespace {

LambdaCase default_lambda_case(const GlmModel& model, const ArmSet& arms, const ParamSpace& omega) {
  double max_op = 0.0;
  for (std::size_t a = 0; a < arms.size(); ++a)
    max_op = std::max(max_op, operator_norm(arms.arm(a)));
  double z_bound = omega.kind() == ParamSpace::Kind::NuclearBall
                       ? omega.radius() * max_op
                       : std::numeric_limits<double>::infinity();
  switch (model.kind()) {
    case GlmModel::Kind::Bernoulli:
      return LambdaCase::bounded(1.0, model.r_max_on(z_bound));
    case GlmModel::Kind::Gaussian:
      return LambdaCase::subgaussian(std::sqrt(model.g_tau()));
    case GlmModel::Kind::Poisson:
      return LambdaCase::poisson(model.r_max_on(z_bound));
  }
  raise(ErrorKind::BadConfig, "unknown model kind");
}

}  // namespace

std::vector<long long> proportional_allocation(const Vector& weights, long long n) {
  const std::size_t k = static_cast<std::size_t>(weights.size());
  std::vector<long long> out(k, 0);
  std::vector<std::pair<double, std::size_t>> remainder;
  remainder.reserve(k);
  long long used = 0;
  for (std::size_t a = 0; a < k; ++a) {
    double exact = weights(static_cast<Eigen::Index>(a)) * static_cast<double>(n);
    out[a] = static_cast<long long>(std::floor(exact));
    used += out[a];
    remainder.emplace_back(exact - std::floor(exact), a);
  }
  std::sort(remainder.begin(), remainder.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;  // stable tie-break for determinism
  });
  for (long long i = 0; i < n - used; ++i) out[remainder[static_cast<std::size_t>(i)].second]++;
  return out;
}

Stage2Result stage2_refine(const ArmSet& arms, const GlmModel& model, const ObservationFn& observe,
                           const Design& pi2, const Matrix& theta0, long long n2,
                           const ParamSpace& omega, const StageIIConfig& cfg, Rng& rng,
                           double cond_limit, SamplingMode sampling) {
  if (n2 < 1) raise(ErrorKind::BadBudget, "stage2_refine: N2 must be >= 1");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
    raise(ErrorKind::BadConfidence, "stage2_refine: delta must lie in (0,1)");
  const int d1 = arms.d1(), d2 = arms.d2();
  if (theta0.rows() != d1 || theta0.cols() != d2)
    raise(ErrorKind::ShapeMismatch, "stage2_refine: theta0 shape does not match arms");
  pi2.validate(arms.size());

  Stage2Result out;
  Matrix h = hessian_matrix(pi2, arms, model, theta0);
  Matrix h_inv = invert_psd_guarded(h, cond_limit);
  GlBreakdown bd = gl_breakdown_from_inverse(h_inv, d1, d2);
  out.gl_value = bd.gl;

  const double r_s = model.self_concordance();
  const double log_term = std::log(4.0 * (d1 + d2) / cfg.delta);
  out.nu = cfg.nu_override.value_or(
      std::sqrt(2.0 / ((1.0 + r_s) * bd.gl * static_cast<double>(n2)) * log_term));

  // draws sharing (arm, response) collapse to one spectral evaluation with a
  // multiplicity weight; exact because psi_tilde_nu is deterministic
  std::vector<Matrix> h_inv_varm(arms.size());
  std::vector<double> mu0(arms.size(), 0.0);
  std::vector<char> mu0_ready(arms.size(), 0);
  std::map<std::pair<std::size_t, double>, double> group_weight;
  if (sampling == SamplingMode::Proportional) {
    std::vector<long long> alloc = proportional_allocation(pi2.weights, n2);
    for (std::size_t a = 0; a < arms.size(); ++a)
      for (long long c = 0; c < alloc[a]; ++c) group_weight[{a, observe(a, rng)}] += 1.0;
  } else {
    std::span<const double> w2(pi2.weights.data(), static_cast<std::size_t>(pi2.weights.size()));
    for (long long t = 0; t < n2; ++t) {
      std::size_t a = rng.discrete(w2);
      double y = observe(a, rng);
      group_weight[{a, y}] += 1.0;
    }
  }
  std::vector<Matrix> group_samples;
  std::vector<double> group_counts;
  group_samples.reserve(group_weight.size());
  for (const auto& [key, count] : group_weight) {
    auto [a, y] = key;
    if (!mu0_ready[a]) {
      h_inv_varm[a] = unvec(h_inv * arms.varm(a), d1, d2);
      mu0[a] = model.mu(arms.arm(a).cwiseProduct(theta0).sum());
      mu0_ready[a] = 1;
    }
    group_samples.push_back((y - mu0[a]) * h_inv_varm[a]);
    group_counts.push_back(count);
  }
  Matrix aggregate = catoni_aggregate_weighted(group_samples, group_counts,
                                               static_cast<double>(n2), out.nu);

  Matrix theta1 = project_param_space(theta0 + aggregate, omega);

  double thres_default =
      cfg.profile == ThresholdProfile::Experiment
          ? std::sqrt(16.0 * bd.gl / static_cast<double>(n2) * std::log(24.0 / cfg.delta))
          : std::sqrt(8.0 * (1.0 + r_s) * bd.gl / static_cast<double>(n2) * log_term);
  out.sigma_thres = cfg.sigma_thres_override.value_or(thres_default);

  Eigen::JacobiSVD<Matrix> svd(theta1, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  int keep = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > out.sigma_thres) ++keep;
  if (cfg.rank_cap) keep = std::min(keep, *cfg.rank_cap);
  // skew-symmetric spectra pair up; never cut a pair in half
  if (omega.kind() == ParamSpace::Kind::SkewSymmetric && keep % 2 == 1) --keep;
  Vector s_kept = s;
  for (Eigen::Index i = keep; i < s_kept.size(); ++i) s_kept(i) = 0.0;
  out.theta_hat = project_param_space(
      svd.matrixU() * s_kept.asDiagonal() * svd.matrixV().transpose(), omega);
  out.rank_hat = keep;
  return out;
}

StageIBudgetDiagnostic stage1_budget_diagnostic(const ArmSet& arms, const GlmModel& model,
                                                const Design& pi1, const Matrix& theta_star,
                                                int rank, double delta, long long n2,
                                                double r_max) {
  if (rank < 1) raise(ErrorKind::BadRank, "stage1_budget_diagnostic: rank must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    raise(ErrorKind::BadConfidence, "stage1_budget_diagnostic: delta in (0,1)");
  const int d1 = arms.d1(), d2 = arms.d2();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian_matrix(pi1, arms, model, theta_star));
  const double c_h = eig.eigenvalues()(0);
  if (!(c_h > 0.0)) raise(ErrorKind::SingularHessian, "stage1_budget_diagnostic: H(pi1) singular");

  const double r = static_cast<double>(rank);
  const double r_s = model.self_concordance();
  // f is the sqrt(N)-free part of the regularization weight
  LambdaCase lcase = model.kind() == GlmModel::Kind::Bernoulli ? LambdaCase::bounded(1.0, r_max)
                     : model.kind() == GlmModel::Kind::Gaussian
                         ? LambdaCase::subgaussian(std::sqrt(model.g_tau()))
                         : LambdaCase::poisson(r_max);
  const double f = lambda_selection(model, delta, d1, d2, 1, lcase);

  StageIBudgetDiagnostic out;
  const double lead = r * r * r_max * r_max / (c_h * c_h);
  out.base = 8192.0 * lead *
             (static_cast<double>(pi1.support.size()) * std::numbers::ln2 +
              std::log(2.0 / delta) + 400.0 * r_s * r_s * r * r * f * f / (c_h * c_h));
  const double kappa = kappa_star(arms, model, theta_star);
  const double dmax = std::max(d1, d2);
  out.refinement =
      r_s * r_max * f * f * lead / (r_max * r_max) *
      std::sqrt(dmax * static_cast<double>(n2) /
                (model.g_tau() * std::pow(kappa, 5) * std::log(dmax / delta)));
  out.required = std::max(out.base, out.refinement);
  return out;
}

EstimateReport gl_lowpopart(const ArmSet& arms, const GlmModel& model, const ObservationFn& observe,
                            const Design& pi1, const Pi2Mode& pi2_mode, long long n1, long long n2,
                            const ParamSpace& omega, const StageIIConfig& stage2, Rng& rng,
                            const GlLowPopArtOptions& opts) {
  if (n1 < 1 || n2 < 1) raise(ErrorKind::BadBudget, "gl_lowpopart: N1 and N2 must be >= 1");
  if (!(stage2.delta > 0.0 && stage2.delta < 1.0))
    raise(ErrorKind::BadConfidence, "gl_lowpopart: delta must lie in (0,1)");
  const int d1 = arms.d1(), d2 = arms.d2();
  if (omega.rows() != d1 || omega.cols() != d2)
    raise(ErrorKind::ShapeMismatch, "gl_lowpopart: omega shape does not match arms");
  pi1.validate(arms.size());

  EstimateReport rep;
  rep.n1 = n1;
  rep.n2 = n2;

  // Stage I: nuclear norm-regularized MLE under pi1
  Dataset data1;
  data1.reserve(static_cast<std::size_t>(n1));
  if (opts.sampling == SamplingMode::Proportional) {
    std::vector<long long> alloc = proportional_allocation(pi1.weights, n1);
    for (std::size_t a = 0; a < arms.size(); ++a)
      for (long long c = 0; c < alloc[a]; ++c) data1.push_back({arms.arm(a), observe(a, rng)});
  } else {
    std::span<const double> w1(pi1.weights.data(), static_cast<std::size_t>(pi1.weights.size()));
    for (long long t = 0; t < n1; ++t) {
      std::size_t a = rng.discrete(w1);
      data1.push_back({arms.arm(a), observe(a, rng)});
    }
  }

  LambdaCase lcase = opts.lambda_case.value_or(default_lambda_case(model, arms, omega));
  rep.lambda = opts.lambda_override.value_or(
      lambda_selection(model, stage2.delta, d1, d2, n1, lcase));

  StageIConfig s1cfg;
  s1cfg.lambda = rep.lambda;
  s1cfg.max_iters = opts.stage1_max_iters;
  s1cfg.tol = opts.stage1_tol;
  s1cfg.omega = omega;
  rep.theta0 = stage1_nuclear_mle(data1, model, s1cfg, &rep.stage1);

  // Stage II design (fixed, or GL-optimal at Theta0: the adaptive scenario)
  if (pi2_mode.kind == Pi2Mode::Kind::Fixed) {
    rep.pi2 = pi2_mode.fixed;
    rep.pi2.validate(arms.size());
  } else {
    SolverOptions dopts = opts.design_opts;
    dopts.hessian_cond_limit = opts.hessian_cond_limit;
    DesignResult res = gl_optimal_design(arms, model, rep.theta0, dopts);
    rep.pi2 = std::move(res.design);
    rep.pi2_solver = res.report;
  }

  Stage2Result s2 = stage2_refine(arms, model, observe, rep.pi2, rep.theta0, n2, omega, stage2,
                                  rng, opts.hessian_cond_limit, opts.sampling);
  rep.theta_hat = std::move(s2.theta_hat);
  rep.gl_value = s2.gl_value;
  rep.nu = s2.nu;
  rep.sigma_thres = s2.sigma_thres;
  rep.rank_hat = s2.rank_hat;
  return rep;
}

EstimateReport gl_lowpopart(const ArmSet& arms, const GlmModel& model, const Matrix& theta_star,
                            const Design& pi1, const Pi2Mode& pi2_mode, long long n1, long long n2,
                            const ParamSpace& omega, const StageIIConfig& stage2, Rng& rng,
                            const GlLowPopArtOptions& opts) {
  if (theta_star.rows() != arms.d1() || theta_star.cols() != arms.d2())
    raise(ErrorKind::ShapeMismatch, "gl_lowpopart: theta_star shape does not match arms");
  ObservationFn observe = [&](std::size_t a, Rng& r) {
    double z = arms.arm(a).cwiseProduct(theta_star).sum();
    return sample_observation(model, z, r);
  };
  return gl_lowpopart(arms, model, observe, pi1, pi2_mode, n1, n2, omega, stage2, rng, opts);
}

}  // namespace glrt
