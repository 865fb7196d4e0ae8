#include "tempo/simulation.hpp"

#include <algorithm>

#include "tempo/error.hpp"

namespace tempo {

namespace {

AgentParams with_reward_set(AgentParams p) {
  if (p.reward_deploys) p.micro.zeta = std::max(p.micro.zeta, 3);
  return p;
}

}  // namespace

std::optional<Action> EpisodeLog::choice() const noexcept {
  if (steps.empty()) return std::nullopt;
  const StepLog& last = steps.back();
  if (last.phase != Phase::kTone2) return std::nullopt;
  if (last.action != Action::kShort && last.action != Action::kLong) return std::nullopt;
  return last.action;
}

bool EpisodeLog::correct(int max_interval) const {
  const auto c = choice();
  return c.has_value() && *c == classify(tau, max_interval);
}

bool EpisodeLog::optimal(int max_interval) const {
  if (steps.size() != static_cast<std::size_t>(tau) + 3) return false;
  for (const StepLog& s : steps) {
    if (s.action != optimal_action(s.phase, tau, max_interval)) return false;
  }
  return true;
}

Simulation::Simulation(AgentParams params, TaskConfig task, TimingModel timing,
                       std::uint64_t seed)
    : params_(with_reward_set(std::move(params))),
      task_(task),
      timing_(std::move(timing)),
      env_rng_(make_stream(seed, Stream::kEnvironment)),
      agent_rng_(make_stream(seed, Stream::kAgent)),
      sensor_rng_(make_stream(seed, Stream::kSensor)),
      eval_env_rng_(make_stream(seed, Stream::kEvaluation, 0)),
      eval_sensor_rng_(make_stream(seed, Stream::kEvaluation, 1)) {
  params_.validate();
  task_.validate();
  agent_ = make_agent(params_, agent_rng_);
}

int Simulation::perceive_interval(int tau, Rng& rng) {
  if (!timing_.estimator) return tau;
  const SensorTrace trace =
      synthesize_trace(static_cast<double>(tau), timing_.sensor, timing_.channels,
                       timing_.estimator->samples(), rng);
  return timing_.estimator->estimate(trace);
}

EpisodeLog Simulation::run_episode(EpisodeMode mode, std::optional<int> forced_tau) {
  const bool learn = mode == EpisodeMode::kTrain;
  Rng& env_rng = learn ? env_rng_ : eval_env_rng_;
  Rng& sensor_rng = learn ? sensor_rng_ : eval_sensor_rng_;
  EnvState env = forced_tau ? reset_with_tau(task_, *forced_tau) : reset(task_, env_rng);
  begin_episode(agent_);

  EpisodeLog log;
  log.tau = env.tau;
  log.steps.reserve(static_cast<std::size_t>(env.tau) + 3);

  const std::size_t d = agent_.dimension();
  std::vector<double> x(d, 0.0);
  std::vector<double> x_next(d, 0.0);
  long clock = 0;       // the agent's perceived time
  long tone1_clock = 0;
  features_into(agent_.features, params_.micro, clock, x);

  while (true) {
    StepLog s;
    s.phase = env.phase;
    s.epsilon = agent_.epsilon;
    s.q = q_values(agent_, x);
    switch (mode) {
      case EpisodeMode::kTrain: s.action = select_action(agent_, s.q, agent_rng_); break;
      case EpisodeMode::kGreedy: s.action = greedy_action(s.q); break;
      case EpisodeMode::kProbe:
        s.action = optimal_action(env.phase, env.tau, task_.max_interval);
        break;
    }

    const StepResult r = step(env, s.action, task_);
    s.reward = r.reward;

    double q_next_max = 0.0;
    if (!r.done) {
      switch (r.next.phase) {
        case Phase::kTone1:
          clock += 1;
          tone1_clock = clock;
          agent_.features.deploy(0, clock);
          break;
        case Phase::kTone2:
          log.tau_hat = perceive_interval(r.next.tau, sensor_rng);
          // Both sets are read at the perceived interval: the first set's
          // clock jumps to tau_hat + 1 steps after the first tone and the
          // second set is placed so that tau_hat steps have elapsed on it.
          clock = tone1_clock + log.tau_hat + 1;
          agent_.features.deploy(1, clock - log.tau_hat);
          break;
        default:
          clock += 1;
          break;
      }
      features_into(agent_.features, params_.micro, clock, x_next);
      const QValues qn = q_values(agent_, x_next);
      q_next_max = *std::max_element(qn.begin(), qn.end());
    } else if (params_.reward_deploys && r.next.tones_heard == 2) {
      agent_.features.deploy(2, clock + 1);
    }

    s.delta = td_error(r.reward, q_next_max, s.q[index_of(s.action)], params_.gamma);
    if (learn) {
      update(agent_, s.delta, x, s.action, params_);
      decay_epsilon(agent_, params_.rho);
    }
    log.steps.push_back(s);
    if (r.done) break;
    env = r.next;
    std::swap(x, x_next);
  }
  ++episodes_;
  return log;
}

}  // namespace tempo
