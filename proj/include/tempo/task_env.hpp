#pragma once

#include <array>
#include <string_view>

#include "tempo/rng.hpp"

namespace tempo {

enum class Action : int { kStart = 0, kWait = 1, kShort = 2, kLong = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::kStart, Action::kWait, Action::kShort, Action::kLong};

std::string_view action_name(Action a);
// Case-insensitive; throws Error(kUsage) on an unknown name.
Action parse_action(std::string_view name);

constexpr int index_of(Action a) noexcept { return static_cast<int>(a); }

enum class Phase { kInit, kTone1, kInterval, kTone2, kTerminal };

std::string_view phase_name(Phase p);

struct TaskConfig {
  int max_interval = 8;  // L, in steps
  double seconds_per_step = 3.0 / 8.0;
  double reward_correct = 1.0;
  double reward_incorrect = -1.0;
  double reward_step = 0.0;

  int boundary() const noexcept { return max_interval / 2; }
  void validate() const;
};

struct EnvState {
  Phase phase = Phase::kInit;
  int tau = 1;            // sampled number of Interval states
  int step_index = 0;     // t
  int intervals_seen = 0; // Interval states visited so far
  int tones_heard = 0;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

// Short iff tau <= floor(L/2). Throws Error(kParameterDomain) for tau outside [1, L].
Action classify(int tau, int max_interval);

// Fresh episode with tau ~ unif{1..L}.
EnvState reset(const TaskConfig& config, Rng& rng);
// Fresh episode with a fixed tau (probes, evaluation sweeps).
EnvState reset_with_tau(const TaskConfig& config, int tau);

// Advances one step. Wrong-phase actions end the episode with
// reward_incorrect. Throws Error(kUsage) on a terminal state.
StepResult step(const EnvState& state, Action action, const TaskConfig& config);

// The optimal action at a given phase of an episode with interval tau.
Action optimal_action(Phase phase, int tau, int max_interval);

}  // namespace tempo
