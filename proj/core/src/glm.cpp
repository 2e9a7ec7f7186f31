#include "glrt/glm.hpp"

#include <cmath>

#include "glrt/errors.hpp"

namespace glrt {

GlmModel GlmModel::gaussian(double sigma2) {
  if (!(sigma2 > 0.0)) raise(ErrorKind::BadConfig, "gaussian: sigma^2 must be positive");
  return GlmModel(Kind::Gaussian, sigma2, 0.0, 1.0);
}

GlmModel GlmModel::bernoulli() { return GlmModel(Kind::Bernoulli, 1.0, 1.0, 0.25); }

GlmModel GlmModel::poisson() {
  // hint covers |z| <= log(20); estimation-time bounds recompute from the
  // concrete arm set and parameter-space cap via r_max_on
  return GlmModel(Kind::Poisson, 1.0, 1.0, 20.0);
}

GlmModel GlmModel::from_tag(const std::string& tag) {
  if (tag == "bernoulli") return bernoulli();
  if (tag == "poisson") return poisson();
  const std::string prefix = "gaussian";
  if (tag.rfind(prefix, 0) == 0) {
    if (tag.size() == prefix.size()) return gaussian(1.0);
    if (tag[prefix.size()] == ':') {
      double s2 = std::stod(tag.substr(prefix.size() + 1));
      return gaussian(s2);
    }
  }
  raise(ErrorKind::BadConfig, "unknown model tag '" + tag + "'");
}

std::string GlmModel::tag() const {
  switch (kind_) {
    case Kind::Gaussian: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "gaussian:%.17g", g_tau_);
      return buf;
    }
    case Kind::Bernoulli: return "bernoulli";
    case Kind::Poisson: return "poisson";
  }
  return "?";
}

double GlmModel::r_max_on(double z_bound) const {
  switch (kind_) {
    case Kind::Gaussian: return 1.0;
    case Kind::Bernoulli: return 0.25;  // mu' peaks at z = 0
    case Kind::Poisson:
      if (!std::isfinite(z_bound)) return r_max_hint_;
      return std::exp(z_bound);
  }
  return r_max_hint_;
}

double GlmModel::m(double z) const {
  switch (kind_) {
    case Kind::Gaussian: return 0.5 * z * z;
    case Kind::Bernoulli:
      // log(1 + e^z), overflow-safe
      return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    case Kind::Poisson: return std::exp(z);
  }
  return 0.0;
}

double GlmModel::mu(double z) const {
  switch (kind_) {
    case Kind::Gaussian: return z;
    case Kind::Bernoulli: return 1.0 / (1.0 + std::exp(-z));
    case Kind::Poisson: return std::exp(z);
  }
  return 0.0;
}

double GlmModel::mu_dot(double z) const {
  switch (kind_) {
    case Kind::Gaussian: return 1.0;
    case Kind::Bernoulli: {
      double p = mu(z);
      return p * (1.0 - p);
    }
    case Kind::Poisson: return std::exp(z);
  }
  return 0.0;
}

double GlmModel::mu_ddot(double z) const {
  switch (kind_) {
    case Kind::Gaussian: return 0.0;
    case Kind::Bernoulli: {
      double p = mu(z);
      return p * (1.0 - p) * (1.0 - 2.0 * p);
    }
    case Kind::Poisson: return std::exp(z);
  }
  return 0.0;
}

double sample_observation(const GlmModel& model, double z, Rng& rng) {
  if (!std::isfinite(z)) raise(ErrorKind::NonFinite, "sample_observation: non-finite z");
  switch (model.kind()) {
    case GlmModel::Kind::Gaussian:
      return rng.normal(z, std::sqrt(model.g_tau()));
    case GlmModel::Kind::Bernoulli:
      return static_cast<double>(rng.bernoulli(model.mu(z)));
    case GlmModel::Kind::Poisson: {
      double rate = std::exp(z);
      if (rate > kPoissonRateCap)
        raise(ErrorKind::Overflow, "sample_observation: poisson rate exceeds cap");
      return static_cast<double>(rng.poisson(rate));
    }
  }
  raise(ErrorKind::BadConfig, "sample_observation: unknown model kind");
}

namespace {

void check_data(const Dataset& data, const Matrix& theta) {
  if (data.empty()) raise(ErrorKind::EmptyData, "no observations");
  for (const auto& obs : data)
    if (obs.x.rows() != theta.rows() || obs.x.cols() != theta.cols())
      raise(ErrorKind::ShapeMismatch, "observation shape does not match theta");
}

}  // namespace

double neg_log_likelihood(const GlmModel& model, const Dataset& data, const Matrix& theta) {
  check_data(data, theta);
  double total = 0.0;
  for (const auto& obs : data) {
    double z = obs.x.cwiseProduct(theta).sum();
    total += model.m(z) - obs.y * z;
  }
  return total / (static_cast<double>(data.size()) * model.g_tau());
}

Matrix nll_gradient(const GlmModel& model, const Dataset& data, const Matrix& theta) {
  check_data(data, theta);
  Matrix grad = Matrix::Zero(theta.rows(), theta.cols());
  for (const auto& obs : data) {
    double z = obs.x.cwiseProduct(theta).sum();
    grad += (model.mu(z) - obs.y) * obs.x;
  }
  return grad / (static_cast<double>(data.size()) * model.g_tau());
}

double kl_bregman(const GlmModel& model, double z1, double z2) {
  if (!std::isfinite(z1) || !std::isfinite(z2))
    raise(ErrorKind::NonFinite, "kl_bregman: non-finite input");
  return (model.m(z1) - model.m(z2) - model.mu(z2) * (z1 - z2)) / model.g_tau();
}

}  // namespace glrt
