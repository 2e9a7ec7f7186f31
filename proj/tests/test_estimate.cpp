#include <doctest.h>

#include <cmath>

#include "glrt/errors.hpp"
#include "glrt/estimate.hpp"
#include "glrt/harness.hpp"

using namespace glrt;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

ArmSet completion_basis(int d) {
  Rng rng(0);
  return gen_arms(Setting::Completion, d, 0, rng);
}

double lambda_min(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  return eig.eigenvalues()(0);
}

}  // namespace

TEST_CASE("lambda selection follows the concentration cases") {
  GlmModel ber = GlmModel::bernoulli();
  // bounded Bernoulli: sqrt(2 log((d1+d2)/delta) / N)
  double lam = lambda_selection(ber, 0.1, 3, 3, 50000, LambdaCase::bounded(1.0, 0.25));
  CHECK(lam == doctest::Approx(std::sqrt(2.0 * std::log(6.0 / 0.1) / 50000.0)).epsilon(1e-12));

  GlmModel gauss = GlmModel::gaussian(1.0);
  double f = lambda_selection(gauss, 0.05, 2, 2, 1, LambdaCase::subgaussian(1.0));
  double expect = 16.0 * std::numbers::pi * std::sqrt(std::log(4.0) + 2.0 * std::log(100.0));
  CHECK(f == doctest::Approx(expect).epsilon(1e-12));

  // quadrupling N halves lambda
  GlmModel poi = GlmModel::poisson();
  for (const LambdaCase& lc : {LambdaCase::bounded(1.0, 0.25), LambdaCase::subgaussian(2.0)}) {
    const GlmModel& m = lc.kind == LambdaCase::Kind::Bounded ? ber : gauss;
    double l1 = lambda_selection(m, 0.1, 3, 4, 1000, lc);
    double l4 = lambda_selection(m, 0.1, 3, 4, 4000, lc);
    CHECK(l4 == doctest::Approx(0.5 * l1).epsilon(1e-12));
  }
  double p1 = lambda_selection(poi, 0.1, 3, 3, 1000, LambdaCase::poisson(5.0));
  double p4 = lambda_selection(poi, 0.1, 3, 3, 4000, LambdaCase::poisson(5.0));
  CHECK(p4 == doctest::Approx(0.5 * p1).epsilon(1e-12));
  // both Poisson branches evaluate
  CHECK(lambda_selection(poi, 0.1, 3, 3, 1000, LambdaCase::poisson(2.0)) > 0.0);

  CHECK_THROWS_AS(lambda_selection(ber, 1.5, 3, 3, 10, LambdaCase::bounded(1.0, 0.25)), Error);
  CHECK_THROWS_AS(lambda_selection(gauss, 0.1, 3, 3, 10, LambdaCase::poisson(5.0)), Error);
  CHECK_THROWS_AS(lambda_selection(gauss, 0.1, 3, 3, 10, LambdaCase::bounded(1.0, 1.0)), Error);
}

TEST_CASE("stage one shrinks to zero under a huge penalty") {
  Rng rng(3);
  ArmSet basis = completion_basis(3);
  GlmModel gauss = GlmModel::gaussian(1.0);
  Dataset data;
  for (int t = 0; t < 30; ++t) {
    std::size_t a = rng.below(9);
    data.push_back({basis.arm(a), rng.normal()});
  }
  StageIConfig cfg;
  cfg.lambda = 1e6;
  cfg.omega = ParamSpace::unconstrained(3, 3);
  Matrix out = stage1_nuclear_mle(data, gauss, cfg);
  CHECK(out.norm() < 1e-6);
}

TEST_CASE("stage one recovers a noiseless linear completion") {
  Rng rng(5);
  Matrix theta_star = random_matrix(3, 3, rng);
  ArmSet basis = completion_basis(3);
  GlmModel gauss = GlmModel::gaussian(1.0);
  Dataset data;
  for (std::size_t a = 0; a < 9; ++a)
    data.push_back({basis.arm(a), basis.arm(a).cwiseProduct(theta_star).sum()});
  StageIConfig cfg;
  cfg.lambda = 1e-8;
  cfg.omega = ParamSpace::unconstrained(3, 3);
  cfg.max_iters = 20000;
  StageIDiagnostics diag;
  Matrix out = stage1_nuclear_mle(data, gauss, cfg, &diag);
  CHECK((out - theta_star).norm() < 1e-4);

  // accepted objective values never increase
  for (std::size_t i = 1; i < diag.objective_trace.size(); ++i)
    CHECK(diag.objective_trace[i] <= diag.objective_trace[i - 1] + 1e-15);
}

TEST_CASE("stage one objective beats the reference points on simulated data") {
  Rng rng(7);
  Matrix theta_star = gen_instance(3, 1, rng);
  ArmSet basis = completion_basis(3);
  GlmModel ber = GlmModel::bernoulli();
  Dataset data;
  for (int t = 0; t < 4000; ++t) {
    std::size_t a = rng.below(9);
    double z = basis.arm(a).cwiseProduct(theta_star).sum();
    data.push_back({basis.arm(a), sample_observation(ber, z, rng)});
  }
  StageIConfig cfg;
  cfg.lambda = lambda_selection(ber, 0.05, 3, 3, 4000, LambdaCase::bounded(1.0, 0.25));
  cfg.omega = ParamSpace::unconstrained(3, 3);
  Matrix out = stage1_nuclear_mle(data, ber, cfg);

  auto objective = [&](const Matrix& th) {
    return neg_log_likelihood(ber, data, th) + cfg.lambda * nuclear_norm(th);
  };
  CHECK(objective(out) <= objective(Matrix::Zero(3, 3)) + 1e-12);
  CHECK(objective(out) <= objective(theta_star) + 1e-8);
}

TEST_CASE("one-sample estimators") {
  Rng rng(11);
  Matrix theta0 = random_matrix(2, 2, rng);
  Matrix x = random_matrix(2, 2, rng);
  GlmModel gauss = GlmModel::gaussian(1.0);

  double z = x.cwiseProduct(theta0).sum();
  CHECK(one_sample_estimator(x, gauss.mu(z), theta0, Matrix::Identity(4, 4), gauss).norm() ==
        0.0);

  double y = z + 0.7;
  Matrix est = one_sample_estimator(x, y, theta0, Matrix::Identity(4, 4), gauss);
  CHECK((est - 0.7 * x).norm() < 1e-12);

  CHECK_THROWS_AS(one_sample_estimator(x, y, theta0, Matrix::Identity(3, 3), gauss), Error);

  // unbiased at theta0 = theta_star: the empirical mean shrinks to zero
  ArmSet basis = completion_basis(2);
  GlmModel ber = GlmModel::bernoulli();
  Matrix theta_star = 0.5 * random_matrix(2, 2, rng);
  Design u = Design::uniform(4);
  Matrix h_inv = invert_psd_guarded(hessian_matrix(u, basis, ber, theta_star));
  Matrix acc = Matrix::Zero(2, 2);
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    std::size_t a = rng.below(4);
    double zz = basis.arm(a).cwiseProduct(theta_star).sum();
    double yy = sample_observation(ber, zz, rng);
    acc += one_sample_estimator(basis.arm(a), yy, theta_star, h_inv, ber);
  }
  CHECK((acc / n).norm() < 0.05);
}

TEST_CASE("catoni aggregation") {
  std::vector<Matrix> zeros(5, Matrix::Zero(2, 3));
  CHECK(catoni_aggregate(zeros, 0.7).norm() == 0.0);

  Rng rng(13);
  Matrix a = random_matrix(2, 3, rng);
  double nu = 1e-4;
  Matrix single = catoni_aggregate({a}, nu);
  CHECK((single - a).norm() <= 10.0 * nu * nu * std::pow(operator_norm(a), 3));

  CHECK_THROWS_AS(catoni_aggregate({}, 0.5), Error);

  // weighted grouping agrees with the flat list
  std::vector<Matrix> reps = {a, a, a, 2.0 * a};
  Matrix flat = catoni_aggregate(reps, 0.3);
  Matrix grouped = catoni_aggregate_weighted({a, 2.0 * a}, {3.0, 1.0}, 4.0, 0.3);
  CHECK((flat - grouped).norm() < 1e-14);
}

TEST_CASE("catoni operator-norm bound holds at the advertised rate") {
  // known variance statistic: A_i = M + G_i with i.i.d. N(0, s^2) entries
  const int d = 3, n = 150, trials = 100;
  const double s = 0.8, delta = 0.1;
  Matrix m_true(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m_true(i, j) = 0.1 * (i + 1) * (j + 1);

  double sigma2 = n * operator_norm(m_true * m_true.transpose() +
                                    d * s * s * Matrix::Identity(d, d));
  double bound = std::sqrt(2.0 * sigma2 / (static_cast<double>(n) * n) *
                           std::log(2.0 * (d + d) / delta));
  double nu = std::sqrt(2.0 / sigma2 * std::log(2.0 * (d + d) / delta));

  Rng rng(17);
  int covered = 0;
  std::vector<Matrix> samples(n);
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < n; ++i) samples[i] = m_true + s * random_matrix(d, d, rng);
    Matrix est = catoni_aggregate(samples, nu);
    if (operator_norm(est - m_true) <= bound) ++covered;
  }
  CHECK(covered >= static_cast<int>(0.85 * trials));
}

TEST_CASE("hessians at nearby parameters are loewner-comparable") {
  Rng rng(19);
  ArmSet basis = completion_basis(3);
  GlmModel ber = GlmModel::bernoulli();
  Design u = Design::uniform(9);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix theta_star = 0.8 * random_matrix(3, 3, rng);
    Matrix delta = random_matrix(3, 3, rng);
    delta *= rng.uniform(0.1, 0.9) / nuclear_norm(delta);
    Matrix theta0 = theta_star + delta;
    double e = nuclear_norm(theta_star - theta0);
    REQUIRE(ber.self_concordance() * e <= 1.0);

    Matrix h_star = hessian_matrix(u, basis, ber, theta_star);
    Matrix h0 = hessian_matrix(u, basis, ber, theta0);
    double c = 1.0 + 2.0 * ber.self_concordance() * e;
    CHECK(lambda_min(h0 - h_star / c) >= -1e-9);
    CHECK(lambda_min(c * h_star - h0) >= -1e-9);
  }
}

TEST_CASE("pure noise is thresholded to zero") {
  ArmSet basis = completion_basis(3);
  GlmModel gauss = GlmModel::gaussian(1.0);
  Matrix theta_star = Matrix::Zero(3, 3);
  Design u = Design::uniform(9);

  int zeroed = 0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(1000 + seed);
    StageIIConfig s2;
    s2.delta = 0.1;
    EstimateReport rep = gl_lowpopart(basis, gauss, theta_star, u, Pi2Mode::fixed_design(u),
                                      5000, 10000, ParamSpace::unconstrained(3, 3), s2, rng);
    CHECK(operator_norm(rep.theta_hat) <= rep.sigma_thres + 1e-12);
    if (rep.theta_hat.norm() == 0.0) ++zeroed;
  }
  CHECK(zeroed >= 8);
}

TEST_CASE("the pipeline is deterministic and respects the parameter space") {
  ArmSet basis = completion_basis(3);
  GlmModel ber = GlmModel::bernoulli();
  Rng inst_rng(23);
  Matrix theta_star = gen_instance(3, 1, inst_rng);
  Design u = Design::uniform(9);
  StageIIConfig s2;
  s2.delta = 0.05;
  s2.profile = ThresholdProfile::Experiment;

  auto run = [&](std::uint64_t seed) {
    Rng rng(seed);
    return gl_lowpopart(basis, ber, theta_star, u, Pi2Mode::gl_optimal(), 5000, 5000,
                        ParamSpace::unconstrained(3, 3), s2, rng);
  };
  EstimateReport a = run(7), b = run(7), c = run(8);
  CHECK((a.theta_hat - b.theta_hat).norm() == 0.0);
  CHECK((a.theta0 - b.theta0).norm() == 0.0);
  CHECK(a.gl_value == b.gl_value);
  CHECK(a.nu == b.nu);
  CHECK((a.theta_hat - c.theta_hat).norm() != 0.0);

  CHECK(a.rank_hat == numerical_rank(a.theta_hat));
  CHECK(a.n1 == 5000);
  CHECK(a.n2 == 5000);

  // rank_cap is honored
  StageIIConfig capped = s2;
  capped.rank_cap = 1;
  Rng rng(7);
  EstimateReport r = gl_lowpopart(basis, ber, theta_star, u, Pi2Mode::gl_optimal(), 5000, 5000,
                                  ParamSpace::unconstrained(3, 3), capped, rng);
  CHECK(r.rank_hat <= 1);
  CHECK(numerical_rank(r.theta_hat) <= 1);
}

TEST_CASE("skew parameter spaces produce skew estimates with even rank") {
  Rng rng(29);
  // skew ground truth over a spanning arm set
  Matrix b = random_matrix(4, 2, rng);
  Matrix j2(2, 2);
  j2 << 0, 1, -1, 0;
  Matrix theta_star = b * j2 * b.transpose();
  theta_star *= 1.0 / operator_norm(theta_star);

  std::vector<Matrix> raw;
  for (int t = 0; t < 24; ++t) {
    Matrix x = random_matrix(4, 4, rng);
    x *= 0.9 / operator_norm(x);
    raw.push_back(std::move(x));
  }
  ArmSet arms(std::move(raw));
  GlmModel ber = GlmModel::bernoulli();
  Design u = Design::uniform(arms.size());
  StageIIConfig s2;
  s2.delta = 0.05;
  Rng run_rng(31);
  EstimateReport rep = gl_lowpopart(arms, ber, theta_star, u, Pi2Mode::fixed_design(u), 3000,
                                    3000, ParamSpace::skew_symmetric(4), s2, run_rng);
  CHECK((rep.theta_hat + rep.theta_hat.transpose()).norm() < 1e-9);
  CHECK(rep.rank_hat % 2 == 0);
}

TEST_CASE("nuclear-ball parameter spaces are honored end to end") {
  ArmSet basis = completion_basis(3);
  GlmModel ber = GlmModel::bernoulli();
  Rng inst_rng(43);
  Matrix theta_star = gen_instance(3, 1, inst_rng);  // nuclear norm 2
  ParamSpace ball = ParamSpace::nuclear_ball(3, 3, 2.5);
  Design u = Design::uniform(9);
  StageIIConfig s2;
  s2.delta = 0.05;
  s2.profile = ThresholdProfile::Experiment;
  Rng rng(47);
  EstimateReport rep = gl_lowpopart(basis, ber, theta_star, u, Pi2Mode::fixed_design(u), 4000,
                                    4000, ball, s2, rng);
  CHECK(nuclear_norm(rep.theta_hat) <= 2.5 + 1e-9);
  CHECK((project_param_space(rep.theta_hat, ball) - rep.theta_hat).norm() < 1e-9);
  CHECK(nuclear_norm(rep.theta0) <= 2.5 + 1e-9);
}

TEST_CASE("curvature diagnostics for a known parameter") {
  ArmSet basis = completion_basis(2);
  GlmModel ber = GlmModel::bernoulli();
  CHECK(kappa_star(basis, ber, Matrix::Zero(2, 2)) == doctest::Approx(0.25));
  CHECK(kappa_bar(Design::uniform(4), basis, ber, Matrix::Zero(2, 2)) == doctest::Approx(0.25));

  Matrix theta(2, 2);
  theta << 1.5, 0, 0, 0;
  double expect_min = ber.mu_dot(1.5);
  CHECK(kappa_star(basis, ber, theta) == doctest::Approx(expect_min));
  CHECK(kappa_bar(Design::uniform(4), basis, ber, theta) ==
        doctest::Approx(0.25 * (ber.mu_dot(1.5) + 3 * ber.mu_dot(0.0))));
  // the minimum never exceeds the average
  CHECK(kappa_star(basis, ber, theta) <= kappa_bar(Design::uniform(4), basis, ber, theta));
}

TEST_CASE("stage one budget diagnostic scales the right way") {
  ArmSet basis = completion_basis(3);
  GlmModel ber = GlmModel::bernoulli();
  Rng rng(59);
  Matrix theta_star = gen_instance(3, 1, rng);
  Design u = Design::uniform(9);

  StageIBudgetDiagnostic d1 = stage1_budget_diagnostic(basis, ber, u, theta_star, 1, 0.05,
                                                       10000, 0.25);
  CHECK(d1.required > 0.0);
  CHECK(d1.required == std::max(d1.base, d1.refinement));

  StageIBudgetDiagnostic d2 = stage1_budget_diagnostic(basis, ber, u, theta_star, 2, 0.05,
                                                       10000, 0.25);
  CHECK(d2.base > d1.base);  // harder at higher rank

  StageIBudgetDiagnostic d3 = stage1_budget_diagnostic(basis, ber, u, theta_star, 1, 0.05,
                                                       40000, 0.25);
  CHECK(d3.refinement == doctest::Approx(2.0 * d1.refinement));  // sqrt(N2) coupling
}

TEST_CASE("proportional allocation spends the budget exactly") {
  Rng rng(53);
  Vector w(5);
  w << 0.4, 0.25, 0.2, 0.1, 0.05;
  for (long long n : {7LL, 100LL, 999LL}) {
    auto alloc = proportional_allocation(w, n);
    long long total = 0;
    for (std::size_t a = 0; a < alloc.size(); ++a) {
      total += alloc[a];
      CHECK(std::abs(static_cast<double>(alloc[a]) - w(static_cast<Eigen::Index>(a)) * n) < 1.0);
    }
    CHECK(total == n);
  }
}

TEST_CASE("stage two alone accepts a naive center") {
  ArmSet basis = completion_basis(3);
  GlmModel ber = GlmModel::bernoulli();
  Rng inst_rng(37);
  Matrix theta_star = gen_instance(3, 1, inst_rng);
  Design u = Design::uniform(9);
  StageIIConfig s2;
  s2.delta = 0.05;
  s2.profile = ThresholdProfile::Experiment;
  Rng rng(41);
  ObservationFn observe = [&](std::size_t a, Rng& r) {
    double z = basis.arm(a).cwiseProduct(theta_star).sum();
    return sample_observation(ber, z, r);
  };
  Stage2Result res = stage2_refine(basis, ber, observe, u, Matrix::Zero(3, 3), 20000,
                                   ParamSpace::unconstrained(3, 3), s2, rng);
  CHECK(res.gl_value > 0.0);
  CHECK(res.nu > 0.0);
  CHECK(res.rank_hat >= 0);
}

TEST_CASE("median error decays with the budget") {
  ArmSet basis = completion_basis(3);
  GlmModel ber = GlmModel::bernoulli();
  Design u = Design::uniform(9);
  StageIIConfig s2;
  s2.delta = 0.05;
  s2.profile = ThresholdProfile::Experiment;

  auto median_err = [&](long long n) {
    std::vector<double> errs;
    for (int seed = 0; seed < 10; ++seed) {
      Rng inst_rng(500 + seed);
      Matrix theta_star = gen_instance(3, 1, inst_rng);
      Rng rng(900 + seed);
      EstimateReport rep = gl_lowpopart(basis, ber, theta_star, u, Pi2Mode::gl_optimal(), n / 2,
                                        n - n / 2, ParamSpace::unconstrained(3, 3), s2, rng);
      errs.push_back((rep.theta_hat - theta_star).norm());
    }
    return median(errs);
  };
  CHECK(median_err(8000) <= median_err(2000));
}
