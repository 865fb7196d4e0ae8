#include "tempo/task_env.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "tempo/error.hpp"

namespace tempo {

std::string_view action_name(Action a) {
  switch (a) {
    case Action::kStart: return "start";
    case Action::kWait: return "wait";
    case Action::kShort: return "short";
    case Action::kLong: return "long";
  }
  return "?";
}

Action parse_action(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Action a : kAllActions) {
    if (action_name(a) == lower) return a;
  }
  throw Error(ErrorCategory::kUsage, "unknown action '" + std::string(name) + "'");
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::kInit: return "init";
    case Phase::kTone1: return "tone1";
    case Phase::kInterval: return "interval";
    case Phase::kTone2: return "tone2";
    case Phase::kTerminal: return "terminal";
  }
  return "?";
}

void TaskConfig::validate() const {
  if (max_interval < 2) {
    throw Error(ErrorCategory::kParameterDomain, "task max_interval must be >= 2");
  }
  if (!(seconds_per_step > 0.0)) {
    throw Error(ErrorCategory::kParameterDomain, "task seconds_per_step must be positive");
  }
}

Action classify(int tau, int max_interval) {
  if (tau < 1 || tau > max_interval) {
    throw Error(ErrorCategory::kParameterDomain,
                "interval " + std::to_string(tau) + " outside [1, " +
                    std::to_string(max_interval) + "]");
  }
  return tau <= max_interval / 2 ? Action::kShort : Action::kLong;
}

EnvState reset_with_tau(const TaskConfig& config, int tau) {
  if (tau < 1 || tau > config.max_interval) {
    throw Error(ErrorCategory::kParameterDomain, "probe interval out of range");
  }
  EnvState s;
  s.tau = tau;
  return s;
}

EnvState reset(const TaskConfig& config, Rng& rng) {
  const int tau =
      1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(config.max_interval)));
  return reset_with_tau(config, tau);
}

Action optimal_action(Phase phase, int tau, int max_interval) {
  switch (phase) {
    case Phase::kInit: return Action::kStart;
    case Phase::kTone1:
    case Phase::kInterval: return Action::kWait;
    case Phase::kTone2: return classify(tau, max_interval);
    case Phase::kTerminal: break;
  }
  throw Error(ErrorCategory::kUsage, "no action is defined for a terminal state");
}

StepResult step(const EnvState& state, Action action, const TaskConfig& config) {
  if (state.phase == Phase::kTerminal) {
    throw Error(ErrorCategory::kUsage, "step called on a terminal state");
  }
  StepResult r;
  r.next = state;
  r.next.step_index = state.step_index + 1;

  auto terminate = [&](double reward) {
    r.next.phase = Phase::kTerminal;
    r.reward = reward;
    r.done = true;
    return r;
  };

  switch (state.phase) {
    case Phase::kInit:
      if (action != Action::kStart) return terminate(config.reward_incorrect);
      r.next.phase = Phase::kTone1;
      r.next.tones_heard = 1;
      break;
    case Phase::kTone1:
    case Phase::kInterval:
      if (action != Action::kWait) return terminate(config.reward_incorrect);
      if (state.intervals_seen < state.tau) {
        r.next.phase = Phase::kInterval;
        r.next.intervals_seen = state.intervals_seen + 1;
      } else {
        r.next.phase = Phase::kTone2;
        r.next.tones_heard = 2;
      }
      break;
    case Phase::kTone2:
      if (action != Action::kShort && action != Action::kLong) {
        return terminate(config.reward_incorrect);
      }
      return terminate(action == classify(state.tau, config.max_interval)
                           ? config.reward_correct
                           : config.reward_incorrect);
    case Phase::kTerminal: break;
  }
  r.reward = config.reward_step;
  return r;
}

}  // namespace tempo
