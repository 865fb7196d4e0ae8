#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tempo {

// A bank of m microstimuli per stimulus, zeta stimuli per episode.
struct MicrostimuliConfig {
  int m = 8;
  double xi = 0.9;    // trace decay, in [0, 1)
  double beta = 0.05;  // basis width, > 0
  int zeta = 2;       // stimulus events that deploy a set

  std::size_t dimension() const noexcept {
    return static_cast<std::size_t>(m) * static_cast<std::size_t>(zeta);
  }

  // Throws Error(kParameterDomain) when any field is out of range.
  void validate() const;

  bool operator==(const MicrostimuliConfig&) const = default;
};

// exp(-(1 - xi) * t). Throws for xi outside [0, 1).
double trace_height(double steps_since_deploy, double xi);

// Unit-area-style Gaussian bump with center nu and width beta, peak 1/sqrt(2 pi).
double gaussian_basis(double h, double nu, double beta);

struct Deployment {
  int stimulus = 0;  // 0-based set index, < zeta
  long time = 0;     // step at which the set was deployed
};

// Deployed stimulus sets for one episode. Feature levels are recomputed from
// deployment times on every query, never decayed incrementally.
class FeatureState {
 public:
  FeatureState() = default;

  // Throws Error(kState) if the stimulus was already deployed this episode,
  // Error(kParameterDomain) if it is negative.
  void deploy(int stimulus, long now);

  bool deployed(int stimulus) const noexcept;
  std::span<const Deployment> deployments() const noexcept { return deployments_; }
  void clear() noexcept { deployments_.clear(); }

 private:
  std::vector<Deployment> deployments_;
};

// x(j) = h * f(h, j/m, beta) for each deployed set, zero for undeployed ones.
// Layout: set s occupies entries [s*m, (s+1)*m).
std::vector<double> features(const FeatureState& state,
                             const MicrostimuliConfig& config, long now);

// Same, writing into a caller-owned buffer of length config.dimension().
void features_into(const FeatureState& state, const MicrostimuliConfig& config,
                   long now, std::span<double> out);

}  // namespace tempo
