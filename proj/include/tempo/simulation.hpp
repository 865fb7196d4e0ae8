#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "tempo/external_timing.hpp"
#include "tempo/rng.hpp"
#include "tempo/task_env.hpp"
#include "tempo/td_agent.hpp"

namespace tempo {

// How the agent perceives the interval between the two tones.
struct TimingModel {
  // When null the agent perceives the true interval exactly.
  std::shared_ptr<const ElapsedTimeEstimator> estimator;
  OUHyperparams sensor;  // generator of the synthetic sensor streams
  Eigen::Index channels = 10;

  static TimingModel exact() { return {}; }
};

// One step of an episode: the state the action was taken in and its outcome.
struct StepLog {
  Phase phase = Phase::kInit;
  Action action = Action::kStart;
  double reward = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;  // exploration rate in force when the action was chosen
  QValues q{};
};

struct EpisodeLog {
  int tau = 0;
  int tau_hat = 0;  // 0 when the second tone was never reached
  std::vector<StepLog> steps;

  bool reached_tone2() const noexcept { return tau_hat > 0; }
  // The Short/Long choice at the second tone, if one was made.
  std::optional<Action> choice() const noexcept;
  bool correct(int max_interval) const;
  // Greedy Start, Wait..., classify(tau) with nothing else.
  bool optimal(int max_interval) const;
};

enum class EpisodeMode {
  kTrain,   // epsilon-greedy, learning, epsilon decays per step
  kGreedy,  // argmax actions, no learning, epsilon untouched
  kProbe,   // the optimal action sequence, no learning; reads out TD errors
};

// One agent interacting with a fresh environment episode after episode:
// deploy the first microstimulus set at the first tone; at the second tone
// estimate the elapsed time from the sensor stream and read both sets at
// that perceived time; choose epsilon-greedily and learn by TD.
class Simulation {
 public:
  Simulation(AgentParams params, TaskConfig task, TimingModel timing, std::uint64_t seed);

  EpisodeLog run_episode(EpisodeMode mode = EpisodeMode::kTrain,
                         std::optional<int> forced_tau = std::nullopt);

  const AgentState& agent() const noexcept { return agent_; }
  const AgentParams& params() const noexcept { return params_; }
  const TaskConfig& task() const noexcept { return task_; }
  int episodes_run() const noexcept { return episodes_; }

 private:
  int perceive_interval(int tau, Rng& rng);

  AgentParams params_;
  TaskConfig task_;
  TimingModel timing_;
  Rng env_rng_;
  Rng agent_rng_;
  Rng sensor_rng_;
  // Greedy and probe episodes draw from their own streams so that
  // interleaving them leaves the training draws unchanged.
  Rng eval_env_rng_;
  Rng eval_sensor_rng_;
  AgentState agent_;
  int episodes_ = 0;
};

}  // namespace tempo
