#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tempo/config.hpp"
#include "tempo/error.hpp"
#include "tempo/simulation.hpp"
#include "tempo/task_env.hpp"
#include "tempo/td_agent.hpp"

namespace tempo {

// The observed actions of one episode, with the exploration rate in force
// when each was chosen.
struct EpisodeActions {
  int episode = 0;
  int tau = 0;
  std::vector<Action> actions;
  std::vector<double> epsilons;  // parallel to actions
};

using History = std::vector<EpisodeActions>;

History history_from_logs(std::span<const EpisodeLog> logs, int first_episode = 0);

// Runs one learning simulation and records everything the agent did.
History simulate_history(const AgentParams& theta, const TaskConfig& task,
                         const TimingModel& timing, int episodes, std::uint64_t seed);

using ActionRow = std::array<double, kNumActions>;

// Empirical p(a | tau, theta); row tau-1 belongs to interval tau.
struct ActionModel {
  AgentParams theta;
  int max_interval = 0;
  double pseudo_count = 0.5;
  std::vector<ActionRow> counts;  // mean tallies per simulation, unsmoothed
  std::vector<ActionRow> probs;

  // Throws Error(kCoverage) if tau lies outside the model.
  const ActionRow& row(int tau) const;
  double prob(int tau, Action a) const { return row(tau)[index_of(a)]; }
};

// Rebuilds probs from counts with additive smoothing.
void normalize(ActionModel& model);

// Tallies (tau, action) over every step of a history.
std::vector<ActionRow> tally(const History& history, int max_interval);

struct ModelOptions {
  int train_sims = 10;
  int episodes = 2000;
  double pseudo_count = 0.5;
  // When set, only steps whose exploration rate is at most this are tallied,
  // so the model describes the same filtered behavior it will score.
  std::optional<double> epsilon_threshold;
};

// Model from already simulated training histories. Only the first
// `episodes` episodes of each history are tallied (all when nullopt).
ActionModel model_from_histories(const AgentParams& theta, int max_interval,
                                 std::span<const History> histories, double pseudo_count,
                                 std::optional<double> epsilon_threshold = std::nullopt,
                                 std::optional<int> episodes = std::nullopt);

// Seed of training simulation s under a model-building root seed.
constexpr std::uint64_t training_seed(std::uint64_t seed, int s) {
  return derive_seed(seed, static_cast<std::uint64_t>(Stream::kSimulation),
                     static_cast<std::uint64_t>(s));
}

// Simulation s uses training_seed(seed, s). A failing
// simulation is rethrown with that seed in the message.
ActionModel build_action_model(const AgentParams& theta, const TaskConfig& task,
                               const TimingModel& timing, const ModelOptions& options,
                               std::uint64_t seed);

// Negative log-likelihood of the history. With per_episode_weighting each
// episode's terms are scaled by 1/N_k.
double history_nll(const History& history, const ActionModel& model,
                   bool per_episode_weighting = false);

struct MlEstimate {
  std::size_t best = 0;           // index into the candidate list
  std::vector<std::size_t> ties;  // every index within tolerance of the best
  std::vector<double> nll;        // one per candidate, candidate order
};

// Throws Error(kUsage) for an empty candidate list.
MlEstimate ml_estimate(const History& history, std::span<const ActionModel> models,
                       bool per_episode_weighting = false);

// Keeps steps whose recorded exploration rate is at most the threshold.
// Episodes left without actions are dropped.
History filter_exploratory(const History& history, double threshold);

// Same, with the rate of the i-th action (in history order) taken from
// schedule[i]. Throws Error(kUsage) if the schedule is too short.
History filter_exploratory(const History& history, double threshold,
                           std::span<const double> schedule);

// epsilon0 * rho^t for t = 0..steps-1, by repeated multiplication as the agent does.
std::vector<double> epsilon_schedule(double epsilon0, double rho, std::size_t steps);

History apply_mask(const History& history, const ObservationMask& mask);

// Percentage of estimates equal to the truth. Throws Error(kUsage) if empty.
template <class T>
double accuracy(std::span<const T> estimates, const T& truth) {
  if (estimates.empty()) throw Error(ErrorCategory::kUsage, "accuracy of no estimates");
  std::size_t hits = 0;
  for (const T& e : estimates) hits += (e == truth) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(estimates.size());
}

// CSV columns: episode,tau,step,action,epsilon_t
void write_history_csv(const History& history, const std::filesystem::path& path);
History read_history_csv(const std::filesystem::path& path);

nlohmann::json action_model_json(const ActionModel& model);
ActionModel action_model_from_json(const nlohmann::json& j);
void write_action_model(const ActionModel& model, const std::filesystem::path& path);
ActionModel read_action_model(const std::filesystem::path& path);

}  // namespace tempo
