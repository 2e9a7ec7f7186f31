#include "glrt/duel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glrt/errors.hpp"

namespace glrt {

void DuelInstance::validate() const {
  const int d = dim();
  if (theta_star.rows() != theta_star.cols())
    raise(ErrorKind::ShapeMismatch, "DuelInstance: theta_star must be square");
  if ((theta_star + theta_star.transpose()).norm() >= 1e-10)
    raise(ErrorKind::BadConfig, "DuelInstance: theta_star is not skew-symmetric");
  if (numerical_rank(theta_star) % 2 != 0)
    raise(ErrorKind::BadRank, "DuelInstance: skew rank must be even");
  if (features.empty()) raise(ErrorKind::EmptyData, "DuelInstance: no features");
  Matrix stacked(static_cast<Eigen::Index>(features.size()), d);
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].size() != d)
      raise(ErrorKind::ShapeMismatch, "DuelInstance: feature dimension mismatch");
    if (features[k].norm() > 1.0 + 1e-9)
      raise(ErrorKind::BadConfig, "DuelInstance: feature outside the unit ball");
    stacked.row(static_cast<Eigen::Index>(k)) = features[k];
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
  if (qr.rank() < d) raise(ErrorKind::SpanDeficient, "DuelInstance: features do not span R^d");
  if (model.kind() != GlmModel::Kind::Bernoulli)
    raise(ErrorKind::BadConfig, "DuelInstance: comparison model must map to [0,1]");
}

DuelInstance DuelInstance::random(int d, int k, int r, Rng& rng) {
  if (d < 2 || r < 1 || 2 * r > d) raise(ErrorKind::BadRank, "DuelInstance::random: need 2r <= d");
  if (k < d + 1) raise(ErrorKind::BadConfig, "DuelInstance::random: need K >= d+1 arms");
  DuelInstance inst;
  inst.features.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    Vector phi(d);
    for (int j = 0; j < d; ++j) phi(j) = rng.normal();
    phi.normalize();
    inst.features.push_back(std::move(phi));
  }
  Matrix b(d, 2 * r);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < 2 * r; ++j) b(i, j) = rng.normal();
  Matrix j_blk = Matrix::Zero(2 * r, 2 * r);
  for (int l = 0; l < r; ++l) {
    j_blk(2 * l, 2 * l + 1) = 1.0;
    j_blk(2 * l + 1, 2 * l) = -1.0;
  }
  Matrix raw = b * j_blk * b.transpose();
  Matrix theta = 0.5 * (raw - raw.transpose());  // clear accumulation drift
  inst.theta_star = theta * (2.0 / operator_norm(theta));
  inst.validate();
  return inst;
}

double borda_score(const Vector& phi, const Matrix& theta, const std::vector<Vector>& features,
                   const GlmModel& model) {
  if (features.empty()) raise(ErrorKind::EmptyData, "borda_score: empty feature set");
  if (phi.size() != theta.rows() || theta.rows() != theta.cols() ||
      theta.cols() != features.front().size())
    raise(ErrorKind::ShapeMismatch, "borda_score: dimension mismatch");
  double total = 0.0;
  Vector theta_phi = theta.transpose() * phi;  // z_k = phi^T Theta phi_k
  for (const Vector& opp : features) total += model.mu(theta_phi.dot(opp));
  return total / static_cast<double>(features.size());
}

int duel_sample(std::size_t i, std::size_t j, const DuelInstance& instance, Rng& rng) {
  if (i >= instance.num_arms() || j >= instance.num_arms())
    raise(ErrorKind::BadIndex, "duel_sample: arm index out of range");
  double z = instance.features[i].dot(instance.theta_star * instance.features[j]);
  return rng.bernoulli(instance.model.mu(z));
}

BordaDiagnostics borda_diagnostics(const DuelInstance& instance) {
  instance.validate();
  const std::size_t k = instance.num_arms();
  BordaDiagnostics out;
  out.kappa_star = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double z = instance.features[i].dot(instance.theta_star * instance.features[j]);
      out.kappa_star = std::min(out.kappa_star, instance.model.mu_dot(z));
    }

  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    double s = borda_score(instance.features[i], instance.theta_star, instance.features,
                           instance.model);
    if (s > best_score) {
      best_score = s;
      out.winner_index = static_cast<int>(i);
    }
  }

  double acc = 0.0;
  const Vector& winner = instance.features[static_cast<std::size_t>(out.winner_index)];
  for (std::size_t j = 0; j < k; ++j) {
    double z = winner.dot(instance.theta_star * instance.features[j]);
    acc += instance.model.mu_dot(z);
  }
  out.kappa_star_b = acc / static_cast<double>(k);
  return out;
}

PairArms make_pair_arms(const DuelInstance& instance) {
  const int d = instance.dim();
  const std::size_t k = instance.num_arms();
  if (k < 2) raise(ErrorKind::BadConfig, "make_pair_arms: need at least two arms");

  std::vector<Matrix> arms;
  std::vector<std::pair<int, int>> pairs;
  arms.reserve(k * (k - 1));
  pairs.reserve(k * (k - 1));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;  // diagonal pairs carry no skew signal
      arms.push_back(instance.features[i] * instance.features[j].transpose());
      pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }

  // the skew components must span the skew subspace (dimension d(d-1)/2)
  const int skew_dim = d * (d - 1) / 2;
  Matrix stacked(static_cast<Eigen::Index>(arms.size()), d * d);
  for (std::size_t a = 0; a < arms.size(); ++a)
    stacked.row(static_cast<Eigen::Index>(a)) = vec(0.5 * (arms[a] - arms[a].transpose()));
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
  if (qr.rank() < skew_dim)
    raise(ErrorKind::SpanDeficient, "make_pair_arms: pairs do not span the skew subspace");

  return {ArmSet(std::move(arms), /*require_full_span=*/true), std::move(pairs)};
}

RegretTrace betc_glm_lr(const DuelInstance& instance, long long horizon, long long n1,
                        long long n2, double delta, Rng& rng, const BetcOptions& opts) {
  instance.validate();
  if (n1 < 1 || n2 < 1 || n1 + n2 > horizon)
    raise(ErrorKind::BadBudget, "betc_glm_lr: need 1 <= N1, N2 and N1+N2 <= T");

  PairArms pa = make_pair_arms(instance);
  const std::size_t k = instance.num_arms();

  // true Borda scores drive the regret accounting
  std::vector<double> score(k);
  for (std::size_t i = 0; i < k; ++i)
    score[i] = borda_score(instance.features[i], instance.theta_star, instance.features,
                           instance.model);
  double best_score = *std::max_element(score.begin(), score.end());

  RegretTrace trace;
  trace.n1 = n1;
  trace.n2 = n2;
  trace.horizon = horizon;
  trace.rounds.reserve(static_cast<std::size_t>(horizon));

  double cum = 0.0;
  long long round = 0;
  ObservationFn observe = [&](std::size_t arm_index, Rng& r) {
    auto [i, j] = pa.pairs[arm_index];
    int y = duel_sample(static_cast<std::size_t>(i), static_cast<std::size_t>(j), instance, r);
    ++round;
    double inst = best_score - 0.5 * (score[static_cast<std::size_t>(i)] +
                                      score[static_cast<std::size_t>(j)]);
    cum += inst;
    trace.rounds.push_back({round, false, i, j, inst, cum});
    return static_cast<double>(y);
  };

  Design pi1 = opts.pi1_ecad
                   ? ecad(pa.set, opts.design_opts).design
                   : Design::uniform(pa.set.size());
  Pi2Mode pi2 = opts.pi2_gl ? Pi2Mode::gl_optimal() : Pi2Mode::fixed_design(Design::uniform(pa.set.size()));

  ParamSpace omega = ParamSpace::skew_symmetric(instance.dim());
  StageIIConfig s2;
  s2.delta = delta;
  trace.estimate = gl_lowpopart(pa.set, instance.model, observe, pi1, pi2, n1, n2, omega, s2, rng,
                                opts.estimate);
  trace.theta_hat = trace.estimate.theta_hat;

  // estimated Borda winner, ties to the lowest index
  int committed = 0;
  double best_est = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    double s = borda_score(instance.features[i], trace.theta_hat, instance.features,
                           instance.model);
    if (s > best_est) {
      best_est = s;
      committed = static_cast<int>(i);
    }
  }
  trace.committed_arm = committed;
  trace.commit_gap = best_score - score[static_cast<std::size_t>(committed)];

  const double cum_explore = cum;
  for (long long t = n1 + n2 + 1; t <= horizon; ++t) {
    double cum_t = cum_explore + static_cast<double>(t - n1 - n2) * trace.commit_gap;
    trace.rounds.push_back({t, true, committed, committed, trace.commit_gap, cum_t});
  }
  return trace;
}

}  // namespace glrt
