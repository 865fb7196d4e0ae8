#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/external_timing.hpp"
#include "tempo/task_env.hpp"
#include "tempo/td_agent.hpp"

namespace tempo {

// Hidden parts of a history: whole actions and/or whole intervals.
struct ObservationMask {
  std::vector<Action> hidden_actions;
  std::vector<int> hidden_taus;

  bool empty() const noexcept { return hidden_actions.empty() && hidden_taus.empty(); }
  bool hides_action(Action a) const noexcept;
  bool hides_tau(int tau) const noexcept;
  // Throws Error(kConfig) if every action is hidden or a tau is out of range.
  void validate(int max_interval) const;
};

struct TimingConfig {
  bool enabled = true;        // false: the agent perceives tau exactly
  OUHyperparams sensor{1.0, 0.1};
  int channels = 10;          // M
  int samples = 20;           // N per perceived interval
  bool fit = true;            // fit hyperparameters on a calibration stream
  OUHyperparams init{1.0, 0.1};
  int calibration_samples = 200;
  int calibration_channels = 100;
};

// Agent parameters that can be inferred or perturbed, by config name.
inline constexpr const char* kParameterNames[] = {"m",   "xi",  "beta",     "alpha",
                                                  "gamma", "eta", "epsilon0", "rho"};

double get_parameter(const AgentParams& params, const std::string& name);
// Throws Error(kConfig) for an unknown name. m is rounded to the nearest integer.
AgentParams with_parameter(AgentParams params, const std::string& name, double value);

struct InferenceConfig {
  std::string parameter = "m";  // the unknown; every other parameter is known
  std::vector<double> candidates{1, 2, 3, 4, 5, 6, 7, 8};
  double truth = 4;
  int train_sims = 10;
  int train_episodes = 2000;
  int test_sims = 30;
  int test_episodes = 2000;
  double pseudo_count = 0.5;
  bool per_episode_weighting = false;
  double epsilon_threshold = 0.01;
  // Episode-count curve
  std::vector<int> episode_counts{400, 500, 600, 700, 800, 900, 1000, 1250, 1500};
  int curve_repetitions = 300;
  // Tally models over the same number of episodes as the test history.
  bool match_model_episodes = true;
  // Sensitivity
  std::string noise_parameter = "alpha";
  std::vector<double> noise_levels{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int sensitivity_train_sims = 5;
  int sensitivity_test_sims = 5;
  // Scalability
  std::vector<ObservationMask> masks;
  int scalability_test_sims = 50;
};

inline constexpr const char* kExperimentNames[] = {
    "train",    "psychometric", "misclass",    "td-trace",    "q-trace",
    "infer",    "infer-curve",  "sensitivity", "scalability", "timing-demo"};

struct ExperimentConfig {
  std::string experiment = "train";
  AgentParams agent;
  TaskConfig task;
  TimingConfig timing;
  int episodes = 2000;       // training episodes per run
  int eval_episodes = 2000;  // greedy evaluation episodes after training
  std::vector<std::uint64_t> seeds{1};
  int probe_tau = 2;         // td-trace probe interval
  std::vector<int> q_trace_taus{1, 8};
  int timing_trials = 100;   // per tau in timing-demo
  InferenceConfig inference;

  // Throws Error(kConfig) on any invalid field.
  void validate() const;
};

// The six standard scalability masks, from fully observed to most hidden.
std::vector<ObservationMask> default_scalability_masks();

void to_json(nlohmann::json& j, const MicrostimuliConfig& v);
void from_json(const nlohmann::json& j, MicrostimuliConfig& v);
void to_json(nlohmann::json& j, const AgentParams& v);
void from_json(const nlohmann::json& j, AgentParams& v);
void to_json(nlohmann::json& j, const TaskConfig& v);
void from_json(const nlohmann::json& j, TaskConfig& v);
void to_json(nlohmann::json& j, const OUHyperparams& v);
void from_json(const nlohmann::json& j, OUHyperparams& v);
void to_json(nlohmann::json& j, const TimingConfig& v);
void from_json(const nlohmann::json& j, TimingConfig& v);
void to_json(nlohmann::json& j, const ObservationMask& v);
void from_json(const nlohmann::json& j, ObservationMask& v);
void to_json(nlohmann::json& j, const InferenceConfig& v);
void from_json(const nlohmann::json& j, InferenceConfig& v);
void to_json(nlohmann::json& j, const ExperimentConfig& v);
void from_json(const nlohmann::json& j, ExperimentConfig& v);

// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);
std::string dump_config(const ExperimentConfig& config);

}  // namespace tempo
