// glrt: generalized low-rank trace regression toolkit.
//
// Subcommands: design, estimate, simulate-duel, experiment, ablation.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "glrt/design.hpp"
#include "glrt/duel.hpp"
#include "glrt/errors.hpp"
#include "glrt/estimate.hpp"
#include "glrt/harness.hpp"
#include "glrt/io.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

glrt::Matrix matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  glrt::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

ordered_json matrix_to_json(const glrt::Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json design_to_json(const glrt::Design& d, double objective, double certificate) {
  ordered_json out;
  out["weights"] = ordered_json::array();
  for (Eigen::Index i = 0; i < d.weights.size(); ++i) out["weights"].push_back(d.weights(i));
  out["support"] = d.support;
  out["objective_value"] = objective;
  out["certificate"] = certificate;
  return out;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    glrt::write_text_file(path, content);
  }
}

glrt::ArmSet arms_from_config(const json& spec, std::uint64_t seed) {
  const std::string type = spec.at("type").get<std::string>();
  if (type == "file") {
    return glrt::ArmSet(glrt::read_matrix_list_json(spec.at("path").get<std::string>()));
  }
  if (type == "completion") {
    glrt::Rng rng(0);
    return glrt::gen_arms(glrt::Setting::Completion, spec.at("d").get<int>(), 0, rng);
  }
  if (type == "recovery") {
    glrt::Rng rng = glrt::Rng(seed).substream({0xA51});
    return glrt::gen_arms(glrt::Setting::Recovery, spec.at("d").get<int>(),
                          spec.at("K").get<int>(), rng);
  }
  glrt::raise(glrt::ErrorKind::BadConfig, "arms.type must be file|completion|recovery");
}

glrt::ParamSpace omega_from_config(const json& spec, int d1, int d2) {
  if (!spec.is_object()) return glrt::ParamSpace::unconstrained(d1, d2);
  const std::string type = spec.at("type").get<std::string>();
  if (type == "unconstrained") return glrt::ParamSpace::unconstrained(d1, d2);
  if (type == "skew") return glrt::ParamSpace::skew_symmetric(d1);
  if (type == "nuclear")
    return glrt::ParamSpace::nuclear_ball(d1, d2, spec.at("radius").get<double>());
  glrt::raise(glrt::ErrorKind::BadConfig, "omega.type must be unconstrained|skew|nuclear");
}

int cmd_design(const std::string& arms_path, const std::string& objective,
               const std::string& model_tag, const std::string& theta0_path, double epsilon,
               double tol, int max_iters, const std::string& out_path) {
  glrt::ArmSet arms(glrt::read_matrix_list_json(arms_path));
  glrt::SolverOptions opts;
  opts.tol = tol;
  opts.max_iters = max_iters;
  opts.error_on_nonconvergence = false;

  glrt::DesignResult res;
  if (objective == "e-opt") {
    res = glrt::e_optimal_design(arms, opts);
    const std::size_t dim2 = static_cast<std::size_t>(arms.d1()) * arms.d2();
    if (res.design.support.size() > dim2 * dim2) {
      double eps = epsilon > 0.0 ? epsilon : 1.0 / (2.0 * std::max(arms.d1(), arms.d2()));
      auto sparse = glrt::approx_caratheodory(res.design, arms, eps);
      res.design = sparse.design;
      Eigen::SelfAdjointEigenSolver<glrt::Matrix> eig(glrt::design_matrix(res.design, arms));
      res.report.objective = eig.eigenvalues()(0);
    }
  } else if (objective == "gl") {
    glrt::GlmModel model = glrt::GlmModel::from_tag(model_tag);
    if (theta0_path.empty())
      glrt::raise(glrt::ErrorKind::BadConfig, "gl objective needs --theta0");
    glrt::Matrix theta0 = glrt::read_matrix_json(theta0_path);
    res = glrt::gl_optimal_design(arms, model, theta0, opts);
  } else {
    glrt::raise(glrt::ErrorKind::BadConfig, "--objective must be e-opt or gl");
  }

  emit(out_path,
       design_to_json(res.design, res.report.objective, res.report.certificate).dump(2) + "\n");
  return 0;
}

int cmd_estimate(const std::string& config_path, bool no_wall_time) {
  json cfg = json::parse(glrt::read_text_file(config_path));

  const std::uint64_t seed = cfg.value("seed", 0ULL);
  glrt::GlmModel model = glrt::GlmModel::from_tag(cfg.at("model").get<std::string>());
  glrt::ArmSet arms = arms_from_config(cfg.at("arms"), seed);
  const int d1 = arms.d1(), d2 = arms.d2();

  glrt::Matrix theta_star;
  {
    const json& ts = cfg.at("theta_star");
    const std::string type = ts.at("type").get<std::string>();
    if (type == "file") {
      theta_star = glrt::read_matrix_json(ts.at("path").get<std::string>());
    } else if (type == "lowrank") {
      glrt::Rng rng = glrt::Rng(seed).substream({0xB52});
      theta_star = glrt::gen_instance(d1, ts.at("r").get<int>(), rng);
    } else if (type == "zero") {
      theta_star = glrt::Matrix::Zero(d1, d2);
    } else {
      glrt::raise(glrt::ErrorKind::BadConfig, "theta_star.type must be file|lowrank|zero");
    }
  }

  glrt::ParamSpace omega = omega_from_config(cfg.value("omega", json()), d1, d2);
  const long long n = cfg.at("N").get<long long>();
  const long long n1 = cfg.value("N1", n / 2);
  const long long n2 = n - n1;
  const double delta = cfg.value("delta", 0.05);

  glrt::SolverOptions dopts;
  dopts.error_on_nonconvergence = false;
  glrt::Design pi1 = cfg.value("pi1", std::string("uniform")) == "ecad"
                         ? glrt::ecad(arms, dopts).design
                         : glrt::Design::uniform(arms.size());
  glrt::Pi2Mode pi2 = cfg.value("pi2", std::string("gl")) == "gl"
                          ? glrt::Pi2Mode::gl_optimal()
                          : glrt::Pi2Mode::fixed_design(glrt::Design::uniform(arms.size()));

  glrt::StageIIConfig s2;
  s2.delta = delta;
  s2.profile = cfg.value("sigma_thres_profile", std::string("theory")) == "experiment"
                   ? glrt::ThresholdProfile::Experiment
                   : glrt::ThresholdProfile::Theory;
  if (cfg.contains("nu_override")) s2.nu_override = cfg["nu_override"].get<double>();
  if (cfg.contains("sigma_thres_override"))
    s2.sigma_thres_override = cfg["sigma_thres_override"].get<double>();
  if (cfg.contains("rank_cap")) s2.rank_cap = cfg["rank_cap"].get<int>();

  glrt::GlLowPopArtOptions opts;
  if (cfg.value("sampling", std::string("iid")) == "proportional")
    opts.sampling = glrt::SamplingMode::Proportional;

  glrt::Rng rng = glrt::Rng(seed).substream({0xC53});
  const auto t0 = std::chrono::steady_clock::now();
  glrt::EstimateReport rep =
      glrt::gl_lowpopart(arms, model, theta_star, pi1, pi2, n1, n2, omega, s2, rng, opts);
  double wall_ms = no_wall_time ? 0.0
                                : std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() - t0).count();

  glrt::Matrix diff = rep.theta_hat - theta_star;

  ordered_json out;
  out["theta0"] = matrix_to_json(rep.theta0);
  out["theta_hat"] = matrix_to_json(rep.theta_hat);
  out["gl_value"] = rep.gl_value;
  out["nu"] = rep.nu;
  out["sigma_thres"] = rep.sigma_thres;
  out["lambda"] = rep.lambda;
  out["rank_hat"] = rep.rank_hat;
  out["N1"] = rep.n1;
  out["N2"] = rep.n2;
  out["stage1"] = {{"iterations", rep.stage1.iterations},
                   {"converged", rep.stage1.converged},
                   {"final_objective", rep.stage1.objective_trace.empty()
                                           ? 0.0
                                           : rep.stage1.objective_trace.back()}};
  out["pi2"] = design_to_json(rep.pi2, rep.pi2_solver.objective, rep.pi2_solver.certificate);
  out["errors"] = {{"nuclear", glrt::nuclear_norm(diff)},
                   {"frobenius", diff.norm()},
                   {"operator", glrt::operator_norm(diff)}};
  emit(cfg.value("report_path", std::string()), out.dump(2) + "\n");

  std::ostringstream csv;
  csv << "seed,N,variant,nuclear_error,frobenius_error,op_error,rank_hat,gl_value,wall_ms\n";
  csv << seed << ',' << n << ',' << cfg.value("variant", std::string("estimate")) << ','
      << glrt::format_double(glrt::nuclear_norm(diff)) << ','
      << glrt::format_double(diff.norm()) << ',' << glrt::format_double(glrt::operator_norm(diff))
      << ',' << rep.rank_hat << ',' << glrt::format_double(rep.gl_value) << ','
      << glrt::format_double(wall_ms) << "\n";
  emit(cfg.value("csv_path", std::string()), csv.str());
  return 0;
}

int cmd_simulate_duel(const std::string& instance_path, const std::vector<std::int64_t>& random_spec,
                      long long horizon, const std::string& budget_rule, double delta,
                      std::uint64_t seed, const std::string& out_path) {
  glrt::DuelInstance instance;
  if (!instance_path.empty()) {
    json j = json::parse(glrt::read_text_file(instance_path));
    for (const auto& f : j.at("features")) {
      glrt::Vector phi(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) phi(static_cast<Eigen::Index>(i)) = f[i].get<double>();
      instance.features.push_back(std::move(phi));
    }
    instance.theta_star = matrix_from_json(j.at("theta_star"));
    instance.model = glrt::GlmModel::from_tag(j.value("model", std::string("bernoulli")));
    instance.validate();
  } else if (random_spec.size() == 4) {
    glrt::Rng inst_rng(static_cast<std::uint64_t>(random_spec[3]));
    instance = glrt::DuelInstance::random(static_cast<int>(random_spec[0]),
                                          static_cast<int>(random_spec[1]),
                                          static_cast<int>(random_spec[2]), inst_rng);
  } else {
    glrt::raise(glrt::ErrorKind::BadConfig, "need --instance or --random d K r seed");
  }

  long long n1 = 0, n2 = 0;
  {
    std::istringstream ss(budget_rule);
    std::string kind;
    std::getline(ss, kind, ':');
    if (kind == "fixed") {
      std::string a, b;
      if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':'))
        glrt::raise(glrt::ErrorKind::BadConfig, "budget rule fixed:N1:N2");
      n1 = std::stoll(a);
      n2 = std::stoll(b);
    } else if (kind == "t23") {
      std::string c_str;
      if (!std::getline(ss, c_str, ':'))
        glrt::raise(glrt::ErrorKind::BadConfig, "budget rule t23:c");
      double c = glrt::parse_double(c_str);
      // N2 = c*T^{2/3}; Stage I gets the d*sqrt(N2) warmup share
      n2 = static_cast<long long>(std::ceil(c * std::pow(static_cast<double>(horizon), 2.0 / 3.0)));
      n1 = static_cast<long long>(instance.dim()) *
           static_cast<long long>(std::ceil(std::sqrt(static_cast<double>(n2))));
    } else {
      glrt::raise(glrt::ErrorKind::BadConfig, "budget rule must be fixed:N1:N2 or t23:c");
    }
  }

  glrt::Rng rng = glrt::Rng(seed).substream({0xD54});
  glrt::RegretTrace trace = glrt::betc_glm_lr(instance, horizon, n1, n2, delta, rng);

  std::ostringstream csv;
  csv << "round,phase,pair_i,pair_j,inst_regret,cum_regret\n";
  for (const glrt::RegretRound& r : trace.rounds) {
    csv << r.round << ',' << (r.commit ? "commit" : "explore") << ',' << r.i << ',' << r.j << ','
        << glrt::format_double(r.inst_regret) << ',' << glrt::format_double(r.cum_regret) << "\n";
  }
  emit(out_path, csv.str());
  return 0;
}

glrt::ExperimentConfig experiment_config_from_json(const std::string& path, int workers,
                                                   bool no_wall_time, bool ablation_defaults) {
  json j = json::parse(glrt::read_text_file(path));
  glrt::ExperimentConfig cfg;
  cfg.setting = j.value("setting", std::string("completion")) == "recovery"
                    ? glrt::Setting::Recovery
                    : glrt::Setting::Completion;
  cfg.recovery_arms = j.value("K", 150);
  cfg.d = j.value("d", 3);
  cfg.r = j.value("r", 1);
  if (j.contains("sample_sizes"))
    cfg.sample_sizes = j["sample_sizes"].get<std::vector<long long>>();
  cfg.repetitions = j.value("repetitions", 60);
  if (j.contains("variants")) {
    cfg.variants.clear();
    for (const auto& v : j["variants"])
      cfg.variants.push_back(glrt::variant_from_string(v.get<std::string>()));
  } else if (ablation_defaults) {
    cfg.variants = {glrt::Variant::U_GL, glrt::Variant::E_GL, glrt::Variant::ZERO_GL,
                    glrt::Variant::RAND_GL};
  }
  cfg.delta = j.value("delta", 0.05);
  cfg.seed = j.value("seed", 0ULL);
  cfg.output_dir = j.value("output_dir", std::string("."));
  cfg.workers = workers;
  cfg.record_wall = !no_wall_time;
  return cfg;
}

int cmd_experiment(const std::string& config_path, int workers, bool no_wall_time,
                   bool ablation_defaults) {
  glrt::ExperimentConfig cfg =
      experiment_config_from_json(config_path, workers, no_wall_time, ablation_defaults);
  glrt::ResultTable table = glrt::run_experiment(cfg);
  std::size_t failed = 0;
  for (const auto& row : table.rows)
    if (row.status.rfind("ok", 0) != 0) ++failed;
  std::cerr << "rows: " << table.rows.size() << ", failed: " << failed << "\n";
  return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generalized low-rank trace regression toolkit"};
  app.require_subcommand(1);

  // design
  auto* design = app.add_subcommand("design", "solve an experimental design problem");
  std::string d_arms, d_objective = "e-opt", d_model = "bernoulli", d_theta0, d_out;
  double d_epsilon = 0.0, d_tol = 1e-3;
  int d_max_iters = 5000;
  design->add_option("--arms", d_arms, "JSON file with a list of sensing matrices")->required();
  design->add_option("--objective", d_objective, "e-opt or gl");
  design->add_option("--model", d_model, "model tag (gaussian:<s2>|bernoulli|poisson)");
  design->add_option("--theta0", d_theta0, "JSON matrix file (gl objective)");
  design->add_option("--epsilon", d_epsilon, "Caratheodory accuracy (e-opt sparsification)");
  design->add_option("--tol", d_tol, "relative certificate tolerance");
  design->add_option("--max-iters", d_max_iters, "solver iteration cap");
  design->add_option("--out", d_out, "output path (default stdout)");

  // estimate
  auto* estimate = app.add_subcommand("estimate", "run the two-stage estimator once");
  std::string e_config;
  bool e_no_wall = false;
  estimate->add_option("--config", e_config, "JSON config")->required();
  estimate->add_flag("--no-wall-time", e_no_wall, "write wall_ms as 0 for reproducible bytes");

  // simulate-duel
  auto* duel = app.add_subcommand("simulate-duel", "bilinear dueling-bandit simulation");
  std::string s_instance, s_budget = "t23:1", s_out;
  std::vector<std::int64_t> s_random;
  long long s_horizon = 100000;
  double s_delta = 0.05;
  std::uint64_t s_seed = 0;
  duel->add_option("--instance", s_instance, "instance JSON file");
  duel->add_option("--random", s_random, "d K r seed")->expected(4);
  duel->add_option("--T", s_horizon, "horizon")->required();
  duel->add_option("--budget-rule", s_budget, "fixed:N1:N2 or t23:c");
  duel->add_option("--delta", s_delta, "confidence level");
  duel->add_option("--seed", s_seed, "simulation seed");
  duel->add_option("--out", s_out, "trace CSV path (default stdout)");

  // experiment / ablation
  auto* experiment = app.add_subcommand("experiment", "reproduction study grid");
  std::string x_config;
  int x_workers = 0;
  bool x_no_wall = false;
  experiment->add_option("--config", x_config, "JSON config")->required();
  experiment->add_option("--workers", x_workers, "worker threads (0 = hardware)");
  experiment->add_flag("--no-wall-time", x_no_wall, "write wall_ms as 0 for reproducible bytes");

  auto* ablation = app.add_subcommand("ablation", "naive-initialization ablation grid");
  std::string a_config;
  int a_workers = 0;
  bool a_no_wall = false;
  ablation->add_option("--config", a_config, "JSON config")->required();
  ablation->add_option("--workers", a_workers, "worker threads (0 = hardware)");
  ablation->add_flag("--no-wall-time", a_no_wall, "write wall_ms as 0 for reproducible bytes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (design->parsed())
      return cmd_design(d_arms, d_objective, d_model, d_theta0, d_epsilon, d_tol, d_max_iters,
                        d_out);
    if (estimate->parsed()) return cmd_estimate(e_config, e_no_wall);
    if (duel->parsed())
      return cmd_simulate_duel(s_instance, s_random, s_horizon, s_budget, s_delta, s_seed, s_out);
    if (experiment->parsed()) return cmd_experiment(x_config, x_workers, x_no_wall, false);
    if (ablation->parsed()) return cmd_experiment(a_config, a_workers, a_no_wall, true);
  } catch (const glrt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
