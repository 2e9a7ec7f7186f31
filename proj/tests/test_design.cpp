#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "glrt/design.hpp"
#include "glrt/errors.hpp"
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

ArmSet random_ball_arms(int d, int k, Rng& rng, bool frobenius) {
  std::vector<Matrix> arms;
  arms.reserve(static_cast<std::size_t>(k));
  for (int a = 0; a < k; ++a) {
    Matrix x = random_matrix(d, d, rng);
    double scale = frobenius ? x.norm() : operator_norm(x);
    x *= rng.uniform(0.4, 1.0) / scale;
    arms.push_back(std::move(x));
  }
  return ArmSet(std::move(arms));
}

Design random_design(std::size_t k, Rng& rng) {
  Vector w(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(0.2, 1.0);
  return Design::from_weights(w);
}

double lambda_min(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  return eig.eigenvalues()(0);
}

}  // namespace

TEST_CASE("arm sets validate operator norms and span") {
  std::vector<Matrix> bad = {2.0 * Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(ArmSet{bad}, Error);

  std::vector<Matrix> deficient = {Matrix::Identity(2, 2), 0.5 * Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(ArmSet{deficient}, Error);

  ArmSet basis = completion_basis(2);
  CHECK(basis.size() == 4);
}

TEST_CASE("design matrix assembles the vectorized second moment") {
  ArmSet basis = completion_basis(2);
  Matrix v = design_matrix(Design::uniform(4), basis);
  CHECK((v - 0.25 * Matrix::Identity(4, 4)).norm() < 1e-14);

  Design point = Design::point_mass(4, 2);
  Matrix vp = design_matrix(point, basis);
  CHECK((vp - basis.varm(2) * basis.varm(2).transpose()).norm() < 1e-14);

  // linear in the weights
  Rng rng(5);
  ArmSet arms = random_ball_arms(2, 9, rng, false);
  Design a = random_design(9, rng), b = random_design(9, rng);
  Design mix = Design::from_weights(0.3 * a.weights + 0.7 * b.weights);
  Matrix lhs = design_matrix(mix, arms);
  Matrix rhs = 0.3 * design_matrix(a, arms) + 0.7 * design_matrix(b, arms);
  CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("hessian matrix weights arms by the link slope") {
  ArmSet basis = completion_basis(2);
  Design u = Design::uniform(4);
  Matrix theta = 0.3 * Matrix::Ones(2, 2);

  Matrix h_lin = hessian_matrix(u, basis, GlmModel::gaussian(1.0), theta);
  CHECK((h_lin - design_matrix(u, basis)).norm() < 1e-14);

  Matrix h_ber = hessian_matrix(u, basis, GlmModel::bernoulli(), Matrix::Zero(2, 2));
  CHECK((h_ber - 0.25 * design_matrix(u, basis)).norm() < 1e-14);

  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    ArmSet arms = random_ball_arms(2, 8, rng, false);
    Design pi = random_design(8, rng);
    Matrix th = 0.5 * random_matrix(2, 2, rng);
    GlmModel model = GlmModel::bernoulli();
    double min_slope = 1e300;
    for (std::size_t a = 0; a < arms.size(); ++a)
      min_slope = std::min(min_slope, model.mu_dot(arms.arm(a).cwiseProduct(th).sum()));
    double lhs = lambda_min(hessian_matrix(pi, arms, model, th));
    double rhs = min_slope * lambda_min(design_matrix(pi, arms));
    CHECK(lhs >= rhs - 1e-10);
  }
}

TEST_CASE("gl objective on the completion basis with the linear link") {
  ArmSet basis = completion_basis(2);
  GlmModel gauss = GlmModel::gaussian(1.0);
  GlBreakdown bd = gl_objective(Design::uniform(4), basis, gauss, Matrix::Zero(2, 2));
  CHECK(bd.stat_col == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(bd.stat_row == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(bd.gl == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(bd.h_col_blocks.size() == 2);
  CHECK(bd.h_row_blocks.size() == 2);

  // permuting the arm order leaves GL unchanged
  std::vector<Matrix> shuffled = {basis.arm(3), basis.arm(0), basis.arm(2), basis.arm(1)};
  ArmSet perm(std::move(shuffled));
  GlBreakdown bd2 = gl_objective(Design::uniform(4), perm, gauss, Matrix::Zero(2, 2));
  CHECK(bd2.gl == doctest::Approx(bd.gl).epsilon(1e-12));

  ArmSet single(std::vector<Matrix>{Matrix::Identity(1, 1)});
  GlBreakdown bd1 = gl_objective(Design::point_mass(1, 0), single, gauss, Matrix::Zero(1, 1));
  CHECK(bd1.gl == doctest::Approx(1.0).epsilon(1e-12));

  // a rank-deficient design has no GL value
  CHECK_THROWS_AS(gl_objective(Design::point_mass(4, 0), basis, gauss, Matrix::Zero(2, 2)), Error);
}

TEST_CASE("e-optimal design finds the uniform optimum on orthonormal bases") {
  ArmSet basis = completion_basis(2);
  DesignResult res = e_optimal_design(basis);
  CHECK(res.report.converged);
  CHECK(res.report.objective == doctest::Approx(0.25).epsilon(1e-6));
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK(res.design.weights(i) == doctest::Approx(0.25).epsilon(1e-9));

  // the trace bound over a weight grid confirms 1/4 is the optimum
  double best_grid = 0.0;
  const int steps = 12;
  for (int a = 0; a <= steps; ++a)
    for (int b = 0; a + b <= steps; ++b)
      for (int c = 0; a + b + c <= steps; ++c) {
        int d = steps - a - b - c;
        Vector w(4);
        w << a, b, c, d;
        if (w.sum() <= 0) continue;
        Design pi = Design::from_weights(w);
        best_grid = std::max(best_grid, lambda_min(design_matrix(pi, basis)));
      }
  CHECK(best_grid <= 0.25 + 1e-12);

  ArmSet basis23 = [] {
    std::vector<Matrix> arms;
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 2; ++i) {
        Matrix e = Matrix::Zero(2, 3);
        e(i, j) = 1.0;
        arms.push_back(std::move(e));
      }
    return ArmSet(std::move(arms));
  }();
  DesignResult res23 = e_optimal_design(basis23);
  CHECK(res23.report.objective == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
}

TEST_CASE("duplicated arms can share weight without changing the design matrix") {
  ArmSet basis = completion_basis(2);
  std::vector<Matrix> dup = basis.arms();
  dup.push_back(basis.arm(0));
  ArmSet with_dup(std::move(dup));

  Vector w(5);
  w << 0.1, 0.25, 0.25, 0.25, 0.15;  // 0.1 + 0.15 on the duplicated arm
  Vector merged(5);
  merged << 0.25, 0.25, 0.25, 0.25, 0.0;
  Matrix v1 = design_matrix(Design::from_weights(w), with_dup);
  Matrix v2 = design_matrix(Design::from_weights(merged), with_dup);
  CHECK((v1 - v2).norm() < 1e-14);
}

TEST_CASE("approximate caratheodory sparsifies a design") {
  Rng rng(11);
  ArmSet arms = random_ball_arms(3, 150, rng, true);

  Design point = Design::point_mass(150, 7);
  CaratheodoryResult pr = approx_caratheodory(point, arms, 0.5);
  CHECK(pr.design.support == std::vector<std::size_t>{7});
  CHECK(pr.frobenius_error == 0.0);

  Vector w2 = Vector::Zero(150);
  w2(3) = 0.6;
  w2(90) = 0.4;
  CaratheodoryResult two = approx_caratheodory(Design::from_weights(w2), arms, 0.5);
  CHECK(two.design.support.size() == 2);
  CHECK(two.frobenius_error == 0.0);

  const double eps = 1.0 / 6.0;
  Design target = random_design(150, rng);
  CaratheodoryResult res = approx_caratheodory(target, arms, eps);
  CHECK(res.frobenius_error <= eps);
  Matrix vt = design_matrix(target, arms);
  Matrix vs = design_matrix(res.design, arms);
  CHECK((vt - vs).norm() <= eps);
  // Hoffman-Wielandt: the lambda_min drop is at most the Frobenius distance
  CHECK(lambda_min(vs) >= lambda_min(vt) - eps - 1e-12);
}

TEST_CASE("ecad keeps sparse e-optimal designs and bounds the support") {
  ArmSet basis = completion_basis(2);
  DesignResult direct = ecad(basis);
  CHECK(direct.design.support.size() == 4);
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK(direct.design.weights(i) == doctest::Approx(0.25).epsilon(1e-9));

  Rng rng(13);
  ArmSet arms = random_ball_arms(3, 150, rng, true);
  SolverOptions opts;
  opts.error_on_nonconvergence = false;
  DesignResult res = ecad(arms, opts);
  CHECK(res.design.support.size() <= std::min<std::size_t>(150, 81));
  res.design.validate(arms.size());
  CHECK(res.design.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gl subgradient matches finite differences on the simplex") {
  Rng rng(17);
  ArmSet arms = random_ball_arms(2, 10, rng, false);
  GlmModel model = GlmModel::bernoulli();
  Matrix theta0 = 0.4 * random_matrix(2, 2, rng);
  Design pi = random_design(10, rng);

  Vector g = gl_subgradient(pi, arms, model, theta0);
  auto value = [&](const Vector& w) {
    return gl_objective(Design::from_weights(w), arms, model, theta0).gl;
  };
  const double h = 1e-6;
  for (auto [a, b] : {std::pair<int, int>{0, 1}, {2, 7}, {4, 9}, {5, 3}}) {
    Vector up = pi.weights, dn = pi.weights;
    up(a) += h;
    up(b) -= h;
    dn(a) -= h;
    dn(b) += h;
    double fd = (value(up) - value(dn)) / (2.0 * h);
    double an = g(a) - g(b);
    CHECK(std::abs(fd - an) / std::max(std::abs(an), 1e-12) < 1e-4);
  }
}

TEST_CASE("gl-optimal design descends from the uniform start") {
  ArmSet basis = completion_basis(2);
  GlmModel gauss = GlmModel::gaussian(1.0);
  Matrix zero = Matrix::Zero(2, 2);
  double gl_uniform = gl_objective(Design::uniform(4), basis, gauss, zero).gl;

  DesignResult res = gl_optimal_design(basis, gauss, zero);
  CHECK(res.report.objective <= gl_uniform * 1.01);
  CHECK(res.report.objective <= gl_uniform + 1e-12);

  // uniform is a minimizer here: no grid point does better
  Rng rng(19);
  for (int trial = 0; trial < 60; ++trial) {
    Design pi = random_design(4, rng);
    CHECK(gl_objective(pi, basis, gauss, zero).gl >= gl_uniform - 1e-9);
  }

  // heterogeneous arms: still a descent method with a valid output
  Rng rng2(23);
  ArmSet arms = random_ball_arms(2, 12, rng2, false);
  GlmModel ber = GlmModel::bernoulli();
  Matrix theta0 = 0.5 * random_matrix(2, 2, rng2);
  double base = gl_objective(Design::uniform(12), arms, ber, theta0).gl;
  SolverOptions opts;
  opts.error_on_nonconvergence = false;
  DesignResult res2 = gl_optimal_design(arms, ber, theta0, opts);
  CHECK(res2.report.objective <= base + 1e-12);
  res2.design.validate(arms.size());
}

TEST_CASE("gl sandwich bounds hold for random instances") {
  Rng rng(29);
  GlmModel ber = GlmModel::bernoulli();
  for (int trial = 0; trial < 20; ++trial) {
    bool frob = trial % 2 == 0;
    int d1 = 2 + static_cast<int>(rng.below(2));
    int d2 = 2 + static_cast<int>(rng.below(2));
    std::vector<Matrix> raw;
    int k = d1 * d2 + 6;
    for (int a = 0; a < k; ++a) {
      Matrix x = random_matrix(d1, d2, rng);
      x *= rng.uniform(0.4, 1.0) / (frob ? x.norm() : operator_norm(x));
      raw.push_back(std::move(x));
    }
    ArmSet arms(std::move(raw));
    Design pi = random_design(arms.size(), rng);
    Matrix theta = 0.5 * random_matrix(d1, d2, rng);

    GlBreakdown bd = gl_objective(pi, arms, ber, theta);
    double kappa_bar = 0.0;
    for (std::size_t a = 0; a < arms.size(); ++a)
      kappa_bar += pi.weights(static_cast<Eigen::Index>(a)) *
                   ber.mu_dot(arms.arm(a).cwiseProduct(theta).sum());
    double lmin_h = lambda_min(hessian_matrix(pi, arms, ber, theta));
    double dmax = std::max(d1, d2);

    CHECK(bd.gl * (1.0 + 1e-8) >= dmax * dmax / kappa_bar);
    CHECK(bd.gl <= dmax / lmin_h * (1.0 + 1e-8));
    if (frob) CHECK(bd.gl * (1.0 + 1e-8) >= d1 * d2 * dmax / kappa_bar);
  }
}

TEST_CASE("linear link reduces gl to the design-matrix objective") {
  Rng rng(31);
  ArmSet arms = random_ball_arms(2, 10, rng, false);
  Design pi = random_design(10, rng);
  Matrix theta = random_matrix(2, 2, rng);
  GlmModel gauss = GlmModel::gaussian(1.0);

  double via_h = gl_objective(pi, arms, gauss, theta).gl;
  Matrix v_inv = invert_psd_guarded(design_matrix(pi, arms));
  double via_v = gl_breakdown_from_inverse(v_inv, 2, 2).gl;
  CHECK(via_h == doctest::Approx(via_v).epsilon(1e-12));
}

TEST_CASE("adding an arm never hurts the e-optimal objective") {
  Rng rng(37);
  SolverOptions opts;
  opts.error_on_nonconvergence = false;
  for (int trial = 0; trial < 3; ++trial) {
    ArmSet arms = random_ball_arms(2, 8, rng, false);
    double before = e_optimal_design(arms, opts).report.objective;
    std::vector<Matrix> extended = arms.arms();
    Matrix extra = random_matrix(2, 2, rng);
    extra *= 0.9 / operator_norm(extra);
    extended.push_back(std::move(extra));
    ArmSet bigger(std::move(extended));
    double after = e_optimal_design(bigger, opts).report.objective;
    CHECK(after >= before - 1e-6);
  }
}
