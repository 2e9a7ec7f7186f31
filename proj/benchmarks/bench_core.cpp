#include <benchmark/benchmark.h>

#include "glrt/design.hpp"
#include "glrt/estimate.hpp"
#include "glrt/harness.hpp"

using namespace glrt;

namespace {

ArmSet recovery_arms(int d, int k) {
  Rng rng(7);
  return gen_arms(Setting::Recovery, d, k, rng);
}

Dataset bernoulli_draws(const ArmSet& arms, const Matrix& theta_star, long long n) {
  GlmModel ber = GlmModel::bernoulli();
  Rng rng(11);
  Dataset data;
  data.reserve(static_cast<std::size_t>(n));
  for (long long t = 0; t < n; ++t) {
    std::size_t a = rng.below(arms.size());
    double z = arms.arm(a).cwiseProduct(theta_star).sum();
    data.push_back({arms.arm(a), sample_observation(ber, z, rng)});
  }
  return data;
}

void BM_GlObjective(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  ArmSet arms = recovery_arms(d, 12 * d * d);
  Design pi = Design::uniform(arms.size());
  GlmModel ber = GlmModel::bernoulli();
  Rng rng(3);
  Matrix theta0 = gen_instance(d, 1, rng);
  for (auto _ : state) {
    GlBreakdown bd = gl_objective(pi, arms, ber, theta0);
    benchmark::DoNotOptimize(bd.gl);
  }
}
BENCHMARK(BM_GlObjective)->Arg(3)->Arg(4)->Arg(5);

void BM_GlOptimalDesign(benchmark::State& state) {
  const int d = 3;
  ArmSet arms = recovery_arms(d, static_cast<int>(state.range(0)));
  GlmModel ber = GlmModel::bernoulli();
  Rng rng(3);
  Matrix theta0 = gen_instance(d, 1, rng);
  SolverOptions opts;
  opts.error_on_nonconvergence = false;
  opts.max_iters = 500;
  for (auto _ : state) {
    DesignResult res = gl_optimal_design(arms, ber, theta0, opts);
    benchmark::DoNotOptimize(res.report.objective);
  }
}
BENCHMARK(BM_GlOptimalDesign)->Arg(30)->Arg(150);

void BM_EOptimalDesign(benchmark::State& state) {
  ArmSet arms = recovery_arms(3, static_cast<int>(state.range(0)));
  SolverOptions opts;
  opts.error_on_nonconvergence = false;
  for (auto _ : state) {
    DesignResult res = e_optimal_design(arms, opts);
    benchmark::DoNotOptimize(res.report.objective);
  }
}
BENCHMARK(BM_EOptimalDesign)->Arg(30)->Arg(150);

void BM_Stage1NuclearMle(benchmark::State& state) {
  Rng rng(5);
  ArmSet basis = gen_arms(Setting::Completion, 3, 0, rng);
  Matrix theta_star = gen_instance(3, 1, rng);
  Dataset data = bernoulli_draws(basis, theta_star, state.range(0));
  GlmModel ber = GlmModel::bernoulli();
  StageIConfig cfg;
  cfg.lambda = lambda_selection(ber, 0.05, 3, 3, state.range(0), LambdaCase::bounded(1.0, 0.25));
  cfg.omega = ParamSpace::unconstrained(3, 3);
  for (auto _ : state) {
    Matrix out = stage1_nuclear_mle(data, ber, cfg);
    benchmark::DoNotOptimize(out(0, 0));
  }
}
BENCHMARK(BM_Stage1NuclearMle)->Arg(5000)->Arg(25000);

void BM_CatoniAggregate(benchmark::State& state) {
  Rng rng(9);
  std::vector<Matrix> samples;
  for (int i = 0; i < state.range(0); ++i) {
    Matrix a(3, 3);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();
    samples.push_back(std::move(a));
  }
  for (auto _ : state) {
    Matrix out = catoni_aggregate(samples, 0.05);
    benchmark::DoNotOptimize(out(0, 0));
  }
}
BENCHMARK(BM_CatoniAggregate)->Arg(64)->Arg(512);

void BM_GlLowPopArt(benchmark::State& state) {
  Rng arm_rng(5);
  ArmSet basis = gen_arms(Setting::Completion, 3, 0, arm_rng);
  Rng inst_rng(6);
  Matrix theta_star = gen_instance(3, 1, inst_rng);
  GlmModel ber = GlmModel::bernoulli();
  Design u = Design::uniform(9);
  StageIIConfig s2;
  s2.delta = 0.05;
  s2.profile = ThresholdProfile::Experiment;
  const long long n = state.range(0);
  for (auto _ : state) {
    Rng rng(17);
    EstimateReport rep = gl_lowpopart(basis, ber, theta_star, u, Pi2Mode::gl_optimal(), n / 2,
                                      n - n / 2, ParamSpace::unconstrained(3, 3), s2, rng);
    benchmark::DoNotOptimize(rep.rank_hat);
  }
}
BENCHMARK(BM_GlLowPopArt)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
