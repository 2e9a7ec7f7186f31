#pragma once

#include <string>
#include <vector>

#include "glrt/matfun.hpp"
#include "glrt/rng.hpp"

namespace glrt {

/// One trace-regression observation: a sensing matrix and a scalar response.
struct Observation {
  Matrix x;
  double y;
};

using Dataset = std::vector<Observation>;

/// A generalized linear observation family.  The response density is
/// exp((y*z - m(z)) / g_tau) against the family's base measure, where z is
/// the natural parameter, m the log-partition, and mu = m' the inverse link.
class GlmModel {
 public:
  enum class Kind { Gaussian, Bernoulli, Poisson };

  static GlmModel gaussian(double sigma2);
  static GlmModel bernoulli();
  static GlmModel poisson();
  /// "gaussian:<sigma2>", "bernoulli", or "poisson".
  static GlmModel from_tag(const std::string& tag);

  Kind kind() const { return kind_; }
  std::string tag() const;

  double g_tau() const { return g_tau_; }
  /// Self-concordance constant: |mu''| <= R_s * mu'.
  double self_concordance() const { return r_s_; }
  /// Coarse upper bound on mu' over the model's intended operating range.
  double r_max_hint() const { return r_max_hint_; }
  /// Exact sup of mu' over |z| <= z_bound (infinite bound allowed for
  /// Gaussian/Bernoulli; falls back to r_max_hint for unbounded Poisson).
  double r_max_on(double z_bound) const;

  double m(double z) const;        ///< log-partition
  double mu(double z) const;       ///< inverse link, m'
  double mu_dot(double z) const;   ///< mu'
  double mu_ddot(double z) const;  ///< mu''

 private:
  GlmModel(Kind kind, double g_tau, double r_s, double r_max_hint)
      : kind_(kind), g_tau_(g_tau), r_s_(r_s), r_max_hint_(r_max_hint) {}
  Kind kind_;
  double g_tau_;
  double r_s_;
  double r_max_hint_;
};

/// Largest Poisson rate we sample before refusing (silent float loss above).
inline constexpr double kPoissonRateCap = 1e12;

/// Draws y from the model at natural parameter z.  E[y] = mu(z).
double sample_observation(const GlmModel& model, double z, Rng& rng);

/// (1/N) sum_t [m(<X_t, Theta>) - y_t <X_t, Theta>] / g_tau.
double neg_log_likelihood(const GlmModel& model, const Dataset& data, const Matrix& theta);

/// (1/N) sum_t (mu(<X_t, Theta>) - y_t) / g_tau * X_t.
Matrix nll_gradient(const GlmModel& model, const Dataset& data, const Matrix& theta);

/// Bregman form of the KL divergence between two members of the family:
/// [m(z1) - m(z2) - mu(z2)(z1 - z2)] / g_tau = KL(p(.; z2) || p(.; z1)).
double kl_bregman(const GlmModel& model, double z1, double z2);

}  // namespace glrt
