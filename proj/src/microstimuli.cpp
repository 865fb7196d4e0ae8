#include "tempo/microstimuli.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tempo/error.hpp"

namespace tempo {

namespace {

void check_xi(double xi) {
  if (!(xi >= 0.0 && xi < 1.0)) {
    throw Error(ErrorCategory::kParameterDomain,
                "trace decay xi must lie in [0,1), got " + std::to_string(xi));
  }
}

void check_beta(double beta) {
  if (!(beta > 0.0)) {
    throw Error(ErrorCategory::kParameterDomain,
                "basis width beta must be positive, got " + std::to_string(beta));
  }
}

}  // namespace

void MicrostimuliConfig::validate() const {
  if (m < 1) {
    throw Error(ErrorCategory::kParameterDomain, "microstimuli count m must be >= 1");
  }
  if (zeta < 1) {
    throw Error(ErrorCategory::kParameterDomain, "stimulus count zeta must be >= 1");
  }
  check_xi(xi);
  check_beta(beta);
}

double trace_height(double steps_since_deploy, double xi) {
  check_xi(xi);
  return std::exp(-(1.0 - xi) * steps_since_deploy);
}

double gaussian_basis(double h, double nu, double beta) {
  check_beta(beta);
  const double d = h - nu;
  return std::numbers::inv_sqrtpi / std::numbers::sqrt2 *
         std::exp(-d * d / (2.0 * beta * beta));
}

void FeatureState::deploy(int stimulus, long now) {
  if (stimulus < 0) {
    throw Error(ErrorCategory::kParameterDomain, "stimulus index must be nonnegative");
  }
  if (deployed(stimulus)) {
    throw Error(ErrorCategory::kState,
                "stimulus " + std::to_string(stimulus) + " already deployed this episode");
  }
  deployments_.push_back({stimulus, now});
}

bool FeatureState::deployed(int stimulus) const noexcept {
  return std::any_of(deployments_.begin(), deployments_.end(),
                     [stimulus](const Deployment& d) { return d.stimulus == stimulus; });
}

void features_into(const FeatureState& state, const MicrostimuliConfig& config,
                   long now, std::span<double> out) {
  if (out.size() != config.dimension()) {
    throw Error(ErrorCategory::kInternal, "feature buffer has wrong dimension");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (const Deployment& d : state.deployments()) {
    if (d.stimulus >= config.zeta) {
      throw Error(ErrorCategory::kParameterDomain,
                  "stimulus " + std::to_string(d.stimulus) + " exceeds zeta");
    }
    if (now < d.time) {
      throw Error(ErrorCategory::kOrdering,
                  "feature query at step " + std::to_string(now) +
                      " precedes deployment at step " + std::to_string(d.time));
    }
    const double h = trace_height(static_cast<double>(now - d.time), config.xi);
    const std::size_t base = static_cast<std::size_t>(d.stimulus) * config.m;
    for (int j = 1; j <= config.m; ++j) {
      const double nu = static_cast<double>(j) / config.m;
      out[base + j - 1] = h * gaussian_basis(h, nu, config.beta);
    }
  }
}

std::vector<double> features(const FeatureState& state,
                             const MicrostimuliConfig& config, long now) {
  std::vector<double> out(config.dimension(), 0.0);
  features_into(state, config, now, out);
  return out;
}

}  // namespace tempo
