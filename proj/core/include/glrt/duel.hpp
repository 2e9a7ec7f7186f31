#pragma once

#include <utility>
#include <vector>

#include "glrt/estimate.hpp"

namespace glrt {

/// Bilinear dueling-bandit environment: feature vectors in the unit ball and
/// a skew-symmetric preference parameter; the probability that i beats j is
/// mu(phi_i^T Theta phi_j).
struct DuelInstance {
  std::vector<Vector> features;  ///< unit-ball arms spanning R^d
  Matrix theta_star;             ///< skew-symmetric, even rank
  GlmModel model = GlmModel::bernoulli();

  int dim() const { return static_cast<int>(theta_star.rows()); }
  std::size_t num_arms() const { return features.size(); }

  void validate() const;

  /// K unit-sphere features and a random rank-2r skew parameter with
  /// operator norm 2.
  static DuelInstance random(int d, int k, int r, Rng& rng);
};

/// Average win probability of phi against a uniformly random opponent.
double borda_score(const Vector& phi, const Matrix& theta, const std::vector<Vector>& features,
                   const GlmModel& model);

/// One comparison outcome: 1 if arm i beats arm j.
int duel_sample(std::size_t i, std::size_t j, const DuelInstance& instance, Rng& rng);

struct BordaDiagnostics {
  double kappa_star = 0.0;    ///< min over ordered pairs of mu'(phi_i^T Theta phi_j)
  double kappa_star_b = 0.0;  ///< winner-centered average curvature
  int winner_index = 0;       ///< exact Borda winner, ties to the lowest index
};

BordaDiagnostics borda_diagnostics(const DuelInstance& instance);

struct RegretRound {
  long long round = 0;
  bool commit = false;
  int i = 0, j = 0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
};

struct RegretTrace {
  std::vector<RegretRound> rounds;
  long long n1 = 0, n2 = 0, horizon = 0;
  int committed_arm = -1;
  double commit_gap = 0.0;  ///< B(phi_star) - B(phi_hat) under the true model
  Matrix theta_hat;
  EstimateReport estimate;
};

struct BetcOptions {
  bool pi1_ecad = true;  ///< explore Stage I with ECaD (uniform otherwise)
  bool pi2_gl = true;    ///< explore Stage II with the GL-optimal design
  GlLowPopArtOptions estimate;
  SolverOptions design_opts{.error_on_nonconvergence = false};
};

/// Explore-then-commit: spends N1 + N2 rounds estimating Theta over the
/// pair arm set {phi_i phi_j^T, i != j} with the skew-symmetric parameter
/// space, then commits to the estimated Borda winner.
RegretTrace betc_glm_lr(const DuelInstance& instance, long long horizon, long long n1,
                        long long n2, double delta, Rng& rng, const BetcOptions& opts = {});

/// Ordered off-diagonal pair arm set {phi_i phi_j^T} with the pair index map.
struct PairArms {
  ArmSet set;
  std::vector<std::pair<int, int>> pairs;
};
PairArms make_pair_arms(const DuelInstance& instance);

}  // namespace glrt
