#include "glrt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "glrt/errors.hpp"
#include "glrt/io.hpp"

namespace glrt {

namespace {

// substream tags for the per-repetition counter-based streams
constexpr std::uint64_t kTagArms = 0xA51;
constexpr std::uint64_t kTagInstance = 0xB52;
constexpr std::uint64_t kTagSampling = 0xC53;
constexpr std::uint64_t kTagBootstrap = 0xD54;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

const char* to_string(Variant v) {
  switch (v) {
    case Variant::E: return "E";
    case Variant::U: return "U";
    case Variant::E_GL: return "E_GL";
    case Variant::E_U: return "E_U";
    case Variant::U_GL: return "U_GL";
    case Variant::U_U: return "U_U";
    case Variant::BMF_GD: return "BMF_GD";
    case Variant::ZERO_GL: return "ZERO_GL";
    case Variant::RAND_GL: return "RAND_GL";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (Variant v : {Variant::E, Variant::U, Variant::E_GL, Variant::E_U, Variant::U_GL,
                    Variant::U_U, Variant::BMF_GD, Variant::ZERO_GL, Variant::RAND_GL})
    if (s == to_string(v)) return v;
  raise(ErrorKind::BadConfig, "unknown variant '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (d < 1 || r < 1 || r > d) raise(ErrorKind::BadRank, "ExperimentConfig: need 1 <= r <= d");
  if (repetitions < 1) raise(ErrorKind::BadConfig, "ExperimentConfig: repetitions must be >= 1");
  if (sample_sizes.empty()) raise(ErrorKind::BadConfig, "ExperimentConfig: no sample sizes");
  long long prev = 0;
  for (long long n : sample_sizes) {
    if (n <= prev) raise(ErrorKind::BadConfig, "ExperimentConfig: sample sizes must be positive ascending");
    prev = n;
  }
  if (variants.empty()) raise(ErrorKind::BadConfig, "ExperimentConfig: no variants");
  if (!(delta > 0.0 && delta < 1.0)) raise(ErrorKind::BadConfidence, "ExperimentConfig: delta in (0,1)");
  if (setting == Setting::Recovery && recovery_arms < d * d)
    raise(ErrorKind::BadConfig, "ExperimentConfig: recovery needs at least d^2 arms");
}

Matrix gen_instance(int d, int r, Rng& rng) {
  if (r < 1 || r > d) raise(ErrorKind::BadRank, "gen_instance: need 1 <= r <= d");
  Matrix u_raw(d, r);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < r; ++j) u_raw(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(u_raw);
  Matrix q = qr.householderQ() * Matrix::Identity(d, r);
  Matrix r_fac = q.transpose() * u_raw;
  // fix signs so the R diagonal is positive: platform-stable QR
  for (int j = 0; j < r; ++j)
    if (r_fac(j, j) < 0.0) q.col(j) = -q.col(j);
  return 2.0 * q * q.transpose();
}

ArmSet gen_arms(Setting setting, int d, int recovery_arms, Rng& rng) {
  if (setting == Setting::Completion) {
    std::vector<Matrix> arms;
    arms.reserve(static_cast<std::size_t>(d) * d);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        Matrix e = Matrix::Zero(d, d);
        e(i, j) = 1.0;
        arms.push_back(std::move(e));
      }
    return ArmSet(std::move(arms));
  }
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::vector<Matrix> arms;
    arms.reserve(static_cast<std::size_t>(recovery_arms));
    for (int a = 0; a < recovery_arms; ++a) {
      Matrix x(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
      x /= x.norm();  // unit Frobenius sphere, so operator norm <= 1
      arms.push_back(std::move(x));
    }
    try {
      return ArmSet(std::move(arms));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SpanDeficient) throw;
    }
  }
  raise(ErrorKind::SpanDeficient, "gen_arms: recovery arms failed the span check 10 times");
}

Matrix bmf_baseline(const Dataset& data, const GlmModel& model, int d, int r, Rng& rng,
                    BmfDiagnostics* diag) {
  if (data.empty()) raise(ErrorKind::EmptyData, "bmf_baseline: no observations");
  Matrix u(d, r);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < r; ++j) u(i, j) = 1e-4 * rng.normal();

  // group to sufficient statistics once; iterations touch only distinct arms
  struct Group {
    Matrix x;
    double count, ysum;
  };
  std::vector<Group> groups;
  {
    std::vector<std::pair<std::string, std::size_t>> seen;
    for (const auto& obs : data) {
      std::string key(reinterpret_cast<const char*>(obs.x.data()),
                      sizeof(double) * static_cast<std::size_t>(obs.x.size()));
      auto it = std::find_if(seen.begin(), seen.end(),
                             [&](const auto& p) { return p.first == key; });
      if (it == seen.end()) {
        seen.emplace_back(key, groups.size());
        groups.push_back({obs.x, 0.0, 0.0});
        it = std::prev(seen.end());
      }
      groups[it->second].count += 1.0;
      groups[it->second].ysum += obs.y;
    }
  }
  const double n = static_cast<double>(data.size());
  const double g_tau = model.g_tau();

  auto objective = [&](const Matrix& uu) {
    Matrix theta = uu * uu.transpose();
    double total = 0.0;
    for (const auto& grp : groups) {
      double z = grp.x.cwiseProduct(theta).sum();
      total += grp.count * model.m(z) - grp.ysum * z;
    }
    return total / (n * g_tau);
  };

  BmfDiagnostics local;
  local.objective_trace.push_back(objective(u));
  const double step = 0.01;
  int iter = 0;
  double grad_norm = 0.0;
  for (; iter < 10000; ++iter) {
    Matrix theta = u * u.transpose();
    Matrix g_theta = Matrix::Zero(d, d);
    for (const auto& grp : groups) {
      double z = grp.x.cwiseProduct(theta).sum();
      g_theta += (grp.count * model.mu(z) - grp.ysum) * grp.x;
    }
    g_theta /= n * g_tau;
    Matrix grad = (g_theta + g_theta.transpose()) * u;
    grad_norm = grad.norm();
    if (grad_norm < 1e-6) break;
    u -= step * grad;
    local.objective_trace.push_back(objective(u));
  }
  local.iterations = iter;
  local.final_grad_norm = grad_norm;
  if (diag) *diag = std::move(local);
  return u * u.transpose();
}

double median(std::vector<double> values) {
  if (values.empty()) raise(ErrorKind::TooFewValues, "median of empty set");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  double pos = q * static_cast<double>(n - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, n - 1);
  double frac = pos - static_cast<double>(lo);
  return (1.0 - frac) * sorted[lo] + frac * sorted[hi];
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, Rng& rng) {
  if (values.size() < 2) raise(ErrorKind::TooFewValues, "bootstrap_ci: need at least 2 values");
  const std::size_t n = values.size();
  constexpr int kOuter = 1000;
  constexpr int kInner = 500;

  const double m = mean_of(values);
  std::vector<double> outer_means(kOuter);
  std::vector<double> outer_sds(kOuter);
  std::vector<double> resample(n);
  std::vector<double> inner_means(kInner);

  bool degenerate = false;
  for (int b = 0; b < kOuter; ++b) {
    for (std::size_t i = 0; i < n; ++i) resample[i] = values[rng.below(n)];
    outer_means[b] = mean_of(resample);
    for (int c = 0; c < kInner; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += resample[rng.below(n)];
      inner_means[c] = s / static_cast<double>(n);
    }
    outer_sds[b] = sample_sd(inner_means);
    if (outer_sds[b] < 1e-15) degenerate = true;
  }

  std::vector<double> sorted_means = outer_means;
  std::sort(sorted_means.begin(), sorted_means.end());
  const double s_hat = sample_sd(outer_means);
  if (degenerate || s_hat < 1e-15)
    return {quantile_sorted(sorted_means, 0.025), quantile_sorted(sorted_means, 0.975)};

  std::vector<double> t_stats(kOuter);
  for (int b = 0; b < kOuter; ++b) t_stats[b] = (outer_means[b] - m) / outer_sds[b];
  std::sort(t_stats.begin(), t_stats.end());
  const double q_lo = quantile_sorted(t_stats, 0.025);
  const double q_hi = quantile_sorted(t_stats, 0.975);

  const double bias = mean_of(outer_means) - m;
  const double m_bc = m - bias;
  return {m_bc - q_hi * s_hat, m_bc - q_lo * s_hat};
}

namespace {

struct Task {
  std::size_t variant_idx;
  std::size_t size_idx;
  int rep;
};

// stream family per variant: variants sharing a family (same Stage I design)
// also share their draws, which pairs the comparison across variants
std::uint64_t stream_family(Variant v) {
  switch (v) {
    case Variant::E:
    case Variant::E_GL:
    case Variant::E_U: return 1;
    case Variant::U:
    case Variant::U_GL:
    case Variant::U_U:
    case Variant::BMF_GD: return 2;
    case Variant::ZERO_GL: return 3;
    case Variant::RAND_GL: return 4;
  }
  return 0;
}

ResultRow run_one(const ExperimentConfig& cfg, const ArmSet& arms, const Design& pi_e,
                  const Design& pi_u, Variant variant, long long n, int rep) {
  const GlmModel model = GlmModel::bernoulli();
  const std::uint64_t rep_seed = cfg.seed + static_cast<std::uint64_t>(rep);

  ResultRow row;
  row.variant = variant;
  row.n = n;
  row.seed = rep_seed;

  Rng inst_rng = Rng(rep_seed).substream({kTagInstance});
  Matrix theta_star = gen_instance(cfg.d, cfg.r, inst_rng);

  Rng rng = Rng(rep_seed).substream(
      {kTagSampling, static_cast<std::uint64_t>(n), stream_family(variant)});

  const ParamSpace omega = ParamSpace::unconstrained(cfg.d, cfg.d);
  const auto t0 = std::chrono::steady_clock::now();

  // proportional allocation throughout the study: every variant spends its
  // budget on exactly round(N*pi) draws per arm, so design comparisons are
  // not blurred by multinomial sampling noise
  auto draw_dataset = [&](const Design& pi, long long count) {
    Dataset data;
    data.reserve(static_cast<std::size_t>(count));
    std::vector<long long> alloc = proportional_allocation(pi.weights, count);
    for (std::size_t a = 0; a < arms.size(); ++a) {
      double z = arms.arm(a).cwiseProduct(theta_star).sum();
      for (long long c = 0; c < alloc[a]; ++c)
        data.push_back({arms.arm(a), sample_observation(model, z, rng)});
    }
    return data;
  };

  Matrix theta_hat;
  try {
    switch (variant) {
      case Variant::E:
      case Variant::U: {
        const Design& pi = variant == Variant::E ? pi_e : pi_u;
        Dataset data = draw_dataset(pi, n);
        StageIConfig s1;
        s1.lambda = lambda_selection(model, cfg.delta, cfg.d, cfg.d, n,
                                     LambdaCase::bounded(1.0, 0.25));
        s1.omega = omega;
        theta_hat = stage1_nuclear_mle(data, model, s1);
        row.rank_hat = numerical_rank(theta_hat);
        break;
      }
      case Variant::E_GL:
      case Variant::E_U:
      case Variant::U_GL:
      case Variant::U_U: {
        const bool pi1_eopt = variant == Variant::E_GL || variant == Variant::E_U;
        const bool pi2_gl = variant == Variant::E_GL || variant == Variant::U_GL;
        const Design& pi1 = pi1_eopt ? pi_e : pi_u;
        Pi2Mode pi2 = pi2_gl ? Pi2Mode::gl_optimal() : Pi2Mode::fixed_design(pi_u);
        long long n1 = n / 2, n2 = n - n1;
        StageIIConfig s2;
        s2.delta = cfg.delta;
        s2.profile = ThresholdProfile::Experiment;
        GlLowPopArtOptions opts;
        opts.sampling = SamplingMode::Proportional;
        EstimateReport report =
            gl_lowpopart(arms, model, theta_star, pi1, pi2, n1, n2, omega, s2, rng, opts);
        theta_hat = report.theta_hat;
        row.rank_hat = report.rank_hat;
        break;
      }
      case Variant::BMF_GD: {
        Dataset data = draw_dataset(pi_u, n);
        theta_hat = bmf_baseline(data, model, cfg.d, cfg.r, rng);
        row.rank_hat = numerical_rank(theta_hat);
        break;
      }
      case Variant::ZERO_GL:
      case Variant::RAND_GL: {
        Matrix theta0;
        if (variant == Variant::ZERO_GL) {
          theta0 = Matrix::Zero(cfg.d, cfg.d);
        } else {
          theta0 = Matrix(cfg.d, cfg.d);
          for (int i = 0; i < cfg.d; ++i)
            for (int j = 0; j < cfg.d; ++j) theta0(i, j) = rng.normal();
        }
        Design pi2 = pi_u;
        try {
          SolverOptions dopts;
          dopts.error_on_nonconvergence = false;
          pi2 = gl_optimal_design(arms, model, theta0, dopts).design;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::SingularHessian) throw;
          row.status = "ok-glfallback";  // degenerate center; keep the uniform start
        }
        StageIIConfig s2;
        s2.delta = cfg.delta;
        s2.profile = ThresholdProfile::Experiment;
        ObservationFn observe = [&](std::size_t a, Rng& r) {
          double z = arms.arm(a).cwiseProduct(theta_star).sum();
          return sample_observation(model, z, r);
        };
        Stage2Result s2r = stage2_refine(arms, model, observe, pi2, theta0, n, omega, s2, rng,
                                         1e12, SamplingMode::Proportional);
        theta_hat = s2r.theta_hat;
        row.rank_hat = s2r.rank_hat;
        break;
      }
    }
    Matrix diff = theta_hat - theta_star;
    row.nuclear_error = nuclear_norm(diff);
    row.frobenius_error = diff.norm();
    row.op_error = operator_norm(diff);
  } catch (const Error& e) {
    row.status = std::string("failed:") + to_string(e.kind());
    row.nuclear_error = kNan;
    row.frobenius_error = kNan;
    row.op_error = kNan;
    row.rank_hat = -1;
  }

  if (cfg.record_wall) {
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0).count();
  }
  return row;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();

  Rng arms_rng = Rng(cfg.seed).substream({kTagArms});
  const ArmSet arms = gen_arms(cfg.setting, cfg.d, cfg.recovery_arms, arms_rng);
  const Design pi_u = Design::uniform(arms.size());

  bool need_eopt = false;
  for (Variant v : cfg.variants)
    if (v == Variant::E || v == Variant::E_GL || v == Variant::E_U) need_eopt = true;
  Design pi_e = pi_u;
  if (need_eopt) {
    SolverOptions dopts;
    dopts.error_on_nonconvergence = false;
    pi_e = ecad(arms, dopts).design;
  }

  std::vector<Task> tasks;
  tasks.reserve(cfg.variants.size() * cfg.sample_sizes.size() *
                static_cast<std::size_t>(cfg.repetitions));
  for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi)
    for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni)
      for (int rep = 0; rep < cfg.repetitions; ++rep) tasks.push_back({vi, ni, rep});

  ResultTable table;
  table.rows.resize(tasks.size());

  int workers = cfg.workers > 0 ? cfg.workers
                                : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min<int>(workers, static_cast<int>(tasks.size()));

  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      table.rows[i] = run_one(cfg, arms, pi_e, pi_u, cfg.variants[t.variant_idx],
                              cfg.sample_sizes[t.size_idx], t.rep);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  // per-cell summaries over rows that completed
  for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi) {
    for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni) {
      CellSummary cell;
      cell.variant = cfg.variants[vi];
      cell.n = cfg.sample_sizes[ni];
      std::vector<double> nuc, fro;
      for (const ResultRow& row : table.rows) {
        if (row.variant != cell.variant || row.n != cell.n) continue;
        if (row.status.rfind("ok", 0) != 0) continue;
        nuc.push_back(row.nuclear_error);
        fro.push_back(row.frobenius_error);
      }
      cell.count = static_cast<int>(nuc.size());
      if (!nuc.empty()) {
        cell.median_nuclear_error = median(nuc);
        cell.median_frobenius_error = median(fro);
        if (nuc.size() >= 2) {
          Rng ci_rng = Rng(cfg.seed).substream(
              {kTagBootstrap, static_cast<std::uint64_t>(vi), static_cast<std::uint64_t>(cell.n)});
          std::tie(cell.ci_low, cell.ci_high) = bootstrap_ci(nuc, ci_rng);
        } else {
          cell.ci_low = cell.ci_high = cell.median_nuclear_error;
        }
      }
      table.summaries.push_back(cell);
    }
  }

  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    write_text_file(cfg.output_dir + "/results.csv", table.to_csv());
    write_text_file(cfg.output_dir + "/summary.json", table.summary_json());
  }
  return table;
}

std::string ResultTable::to_csv() const {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  for (const ResultRow& r : rows) {
    out << to_string(r.variant) << ',' << r.n << ',' << r.seed << ','
        << format_double(r.nuclear_error) << ',' << format_double(r.frobenius_error) << ','
        << format_double(r.op_error) << ',' << r.rank_hat << ',' << format_double(r.wall_ms)
        << ',' << r.status << "\n";
  }
  return out.str();
}

ResultTable ResultTable::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    raise(ErrorKind::BadConfig, "ResultTable::from_csv: unexpected header");
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 9) raise(ErrorKind::BadConfig, "ResultTable::from_csv: bad row");
    ResultRow r;
    r.variant = variant_from_string(fields[0]);
    r.n = std::stoll(fields[1]);
    r.seed = std::stoull(fields[2]);
    r.nuclear_error = parse_double(fields[3]);
    r.frobenius_error = parse_double(fields[4]);
    r.op_error = parse_double(fields[5]);
    r.rank_hat = std::stoi(fields[6]);
    r.wall_ms = parse_double(fields[7]);
    r.status = fields[8];
    table.rows.push_back(std::move(r));
  }
  return table;
}

std::string ResultTable::summary_json() const {
  nlohmann::ordered_json doc;
  doc["cells"] = nlohmann::ordered_json::array();
  for (const CellSummary& c : summaries) {
    nlohmann::ordered_json cell;
    cell["variant"] = to_string(c.variant);
    cell["N"] = c.n;
    cell["count"] = c.count;
    cell["median_nuclear_error"] = c.median_nuclear_error;
    cell["ci_low"] = c.ci_low;
    cell["ci_high"] = c.ci_high;
    cell["median_frobenius_error"] = c.median_frobenius_error;
    doc["cells"].push_back(std::move(cell));
  }
  return doc.dump(2) + "\n";
}

bool ResultTable::all_ok() const {
  for (const ResultRow& r : rows)
    if (r.status.rfind("ok", 0) != 0) return false;
  return true;
}

std::optional<double> ResultTable::median_nuclear(Variant v, long long n) const {
  std::vector<double> vals;
  for (const ResultRow& r : rows)
    if (r.variant == v && r.n == n && r.status.rfind("ok", 0) == 0)
      vals.push_back(r.nuclear_error);
  if (vals.empty()) return std::nullopt;
  return median(std::move(vals));
}

}  // namespace glrt
