#pragma once

#include <array>
#include <span>
#include <vector>

#include "tempo/microstimuli.hpp"
#include "tempo/rng.hpp"
#include "tempo/task_env.hpp"

namespace tempo {

// Whether the taken action's eligibility trace absorbs the current features
// before (kTraceFirst) or after (kWeightsFirst) the weight step.
enum class UpdateOrder { kTraceFirst, kWeightsFirst };

struct AgentParams {
  double alpha = 0.3;     // learning rate
  double gamma = 0.95;    // discount
  double eta = 0.8;       // eligibility decay
  double epsilon0 = 1.0;  // initial exploration
  double rho = 0.995;     // per-step exploration decay
  double weight_init_scale = 0.01;  // initial weights uniform in [0, scale)
  MicrostimuliConfig micro;
  UpdateOrder update_order = UpdateOrder::kTraceFirst;
  // Whether the reward also deploys a microstimulus set (needs micro.zeta >= 3).
  bool reward_deploys = false;

  void validate() const;

  bool operator==(const AgentParams&) const = default;
};

using QValues = std::array<double, kNumActions>;

// Linear Q-learner with one weight vector and one eligibility trace per action
// over the shared microstimulus features.
struct AgentState {
  std::array<std::vector<double>, kNumActions> weights;
  std::array<std::vector<double>, kNumActions> traces;
  double epsilon = 1.0;
  FeatureState features;

  std::size_t dimension() const noexcept { return weights[0].size(); }
};

// Weights uniform in [0, weight_init_scale), zero traces, epsilon = epsilon0.
AgentState make_agent(const AgentParams& params, Rng& rng);

// Zeroes traces and clears deployed stimuli; weights and epsilon persist.
void begin_episode(AgentState& state);

// w_a . x
double q_value(const AgentState& state, std::span<const double> x, Action action);
QValues q_values(const AgentState& state, std::span<const double> x);

// r + gamma * q_next_max - q_taken
constexpr double td_error(double reward, double q_next_max, double q_taken,
                          double gamma) noexcept {
  return reward + gamma * q_next_max - q_taken;
}

// Every trace decays by gamma*eta. The taken action's trace also accumulates
// x and its weights move by alpha * delta * e; other weights are untouched.
// update_order decides whether that weight step sees the trace with or
// without this step's x.
void update(AgentState& state, double delta, std::span<const double> x,
            Action taken, const AgentParams& params);

// Lowest-index argmax.
Action greedy_action(const QValues& q) noexcept;

// Epsilon-greedy over the current epsilon.
Action select_action(const AgentState& state, const QValues& q, Rng& rng);

inline void decay_epsilon(AgentState& state, double rho) noexcept {
  state.epsilon *= rho;
}

}  // namespace tempo
