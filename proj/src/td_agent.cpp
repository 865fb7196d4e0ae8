#include "tempo/td_agent.hpp"

#include <algorithm>
#include <numeric>

#include "tempo/error.hpp"

namespace tempo {

namespace {

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCategory::kParameterDomain,
                std::string("agent parameter ") + name + " must lie in [0,1]");
  }
}

}  // namespace

void AgentParams::validate() const {
  if (!(alpha > 0.0)) {
    throw Error(ErrorCategory::kParameterDomain, "agent parameter alpha must be positive");
  }
  if (!(weight_init_scale >= 0.0)) {
    throw Error(ErrorCategory::kParameterDomain, "weight_init_scale must be nonnegative");
  }
  check_unit(gamma, "gamma");
  check_unit(eta, "eta");
  check_unit(epsilon0, "epsilon0");
  check_unit(rho, "rho");
  micro.validate();
  if (reward_deploys && micro.zeta < 3) {
    throw Error(ErrorCategory::kParameterDomain,
                "reward deployment needs a third microstimulus set (zeta >= 3)");
  }
}

AgentState make_agent(const AgentParams& params, Rng& rng) {
  const std::size_t d = params.micro.dimension();
  AgentState state;
  for (int a = 0; a < kNumActions; ++a) {
    state.weights[a].resize(d);
    for (double& w : state.weights[a]) w = params.weight_init_scale * uniform01(rng);
    state.traces[a].assign(d, 0.0);
  }
  state.epsilon = params.epsilon0;
  return state;
}

void begin_episode(AgentState& state) {
  for (auto& e : state.traces) std::fill(e.begin(), e.end(), 0.0);
  state.features.clear();
}

double q_value(const AgentState& state, std::span<const double> x, Action action) {
  const auto& w = state.weights[index_of(action)];
  if (w.size() != x.size()) {
    throw Error(ErrorCategory::kInternal, "feature/weight dimension mismatch");
  }
  return std::inner_product(w.begin(), w.end(), x.begin(), 0.0);
}

QValues q_values(const AgentState& state, std::span<const double> x) {
  QValues q{};
  for (Action a : kAllActions) q[index_of(a)] = q_value(state, x, a);
  return q;
}

void update(AgentState& state, double delta, std::span<const double> x,
            Action taken, const AgentParams& params) {
  const std::size_t d = state.dimension();
  if (x.size() != d) {
    throw Error(ErrorCategory::kInternal, "feature/trace dimension mismatch");
  }
  const double decay = params.gamma * params.eta;
  const double step = params.alpha * delta;
  const bool trace_first = params.update_order == UpdateOrder::kTraceFirst;
  for (int a = 0; a < kNumActions; ++a) {
    auto& e = state.traces[a];
    if (a != index_of(taken)) {
      for (double& v : e) v *= decay;
      continue;
    }
    auto& w = state.weights[a];
    for (std::size_t j = 0; j < d; ++j) {
      const double next_e = decay * e[j] + x[j];
      w[j] += step * (trace_first ? next_e : e[j]);
      e[j] = next_e;
    }
  }
}

Action greedy_action(const QValues& q) noexcept {
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (q[a] > q[best]) best = a;
  }
  return static_cast<Action>(best);
}

Action select_action(const AgentState& state, const QValues& q, Rng& rng) {
  // Draw the exploration coin unconditionally so the stream advances the same
  // way regardless of epsilon.
  const double coin = uniform01(rng);
  const auto random_index = static_cast<int>(uniform_index(rng, kNumActions));
  if (coin < state.epsilon) return static_cast<Action>(random_index);
  return greedy_action(q);
}

}  // namespace tempo
