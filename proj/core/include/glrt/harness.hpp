#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "glrt/duel.hpp"
#include "glrt/estimate.hpp"

namespace glrt {

/// 1-bit matrix completion (basis arms) or recovery (random unit-Frobenius
/// measurements).
enum class Setting { Completion, Recovery };

/// Algorithm variants of the reproduction study: Stage-I-only estimators
/// with E-optimal/uniform designs, the four two-stage combinations, the
/// factored gradient-descent baseline, and the naive-initialization Stage-II
/// ablations.
enum class Variant { E, U, E_GL, E_U, U_GL, U_U, BMF_GD, ZERO_GL, RAND_GL };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ExperimentConfig {
  Setting setting = Setting::Completion;
  int recovery_arms = 150;  ///< K, Recovery only
  int d = 3;
  int r = 1;
  std::vector<long long> sample_sizes = {10000, 20000, 30000, 40000, 50000};
  int repetitions = 60;
  std::vector<Variant> variants = {Variant::E,    Variant::U,    Variant::E_GL, Variant::E_U,
                                   Variant::U_GL, Variant::U_U,  Variant::BMF_GD};
  double delta = 0.05;
  std::uint64_t seed = 0;
  std::string output_dir;  ///< empty: nothing persisted
  int workers = 0;         ///< 0: hardware concurrency
  bool record_wall = true; ///< false writes wall_ms = 0 for reproducible bytes

  void validate() const;
};

struct ResultRow {
  Variant variant = Variant::U;
  long long n = 0;
  std::uint64_t seed = 0;  ///< per-repetition seed (base seed + repetition)
  double nuclear_error = 0.0;
  double frobenius_error = 0.0;
  double op_error = 0.0;
  int rank_hat = 0;
  double wall_ms = 0.0;
  std::string status = "ok";
};

struct CellSummary {
  Variant variant = Variant::U;
  long long n = 0;
  int count = 0;  ///< rows with status ok*
  double median_nuclear_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double median_frobenius_error = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;         ///< canonical order: (variant, N, seed)
  std::vector<CellSummary> summaries;  ///< one per (variant, N)

  static constexpr const char* kCsvHeader =
      "variant,N,seed,nuclear_error,frobenius_error,op_error,rank_hat,wall_ms,status";

  std::string to_csv() const;
  static ResultTable from_csv(const std::string& text);  ///< summaries not stored in CSV
  std::string summary_json() const;

  bool all_ok() const;
  /// Median nuclear error of the (variant, N) cell; rows that failed are skipped.
  std::optional<double> median_nuclear(Variant v, long long n) const;
};

/// Theta_star = 2 U U^T with U the sign-fixed thin-QR factor of a standard
/// normal d x r draw; symmetric PSD with r singular values equal to 2.
Matrix gen_instance(int d, int r, Rng& rng);

/// Completion: the d^2 basis matrices e_i e_j^T.  Recovery: K i.i.d. uniform
/// draws from the unit Frobenius sphere, resampled (up to 10 times) until
/// they span the matrix space.
ArmSet gen_arms(Setting setting, int d, int recovery_arms, Rng& rng);

struct BmfDiagnostics {
  std::vector<double> objective_trace;
  int iterations = 0;
  double final_grad_norm = 0.0;
};

/// Burer-Monteiro baseline: gradient descent on the factored likelihood
/// Theta = U U^T from a small random start, fixed step 0.01, stopping when
/// the gradient norm drops below 1e-6 or after 1e4 iterations.
Matrix bmf_baseline(const Dataset& data, const GlmModel& model, int d, int r, Rng& rng,
                    BmfDiagnostics* diag = nullptr);

/// Runs the full (variant x N x repetition) grid; repetitions use
/// counter-based RNG streams so the table is identical for any worker count.
ResultTable run_experiment(const ExperimentConfig& cfg);

/// 95% studentized bootstrap interval with bias correction (1000 outer / 500
/// inner resamples); degenerate inner variances fall back to the percentile
/// bootstrap.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values, Rng& rng);

double median(std::vector<double> values);

}  // namespace glrt
