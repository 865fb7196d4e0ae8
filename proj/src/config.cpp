#include "tempo/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include "tempo/error.hpp"

namespace tempo {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> keys,
                std::string_view where) {
  if (!j.is_object()) {
    throw Error(ErrorCategory::kConfig, std::string(where) + " must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw Error(ErrorCategory::kConfig,
                  "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      it->get_to(out);
    } catch (const json::exception& e) {
      throw Error(ErrorCategory::kConfig, std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

std::string_view order_name(UpdateOrder o) {
  return o == UpdateOrder::kTraceFirst ? "trace-first" : "weights-first";
}

void config_error(const std::string& message) {
  throw Error(ErrorCategory::kConfig, message);
}

}  // namespace

double get_parameter(const AgentParams& p, const std::string& name) {
  if (name == "m") return p.micro.m;
  if (name == "xi") return p.micro.xi;
  if (name == "beta") return p.micro.beta;
  if (name == "alpha") return p.alpha;
  if (name == "gamma") return p.gamma;
  if (name == "eta") return p.eta;
  if (name == "epsilon0") return p.epsilon0;
  if (name == "rho") return p.rho;
  config_error("unknown agent parameter '" + name + "'");
  return 0.0;
}

AgentParams with_parameter(AgentParams p, const std::string& name, double value) {
  if (name == "m") {
    p.micro.m = static_cast<int>(std::lround(value));
  } else if (name == "xi") {
    p.micro.xi = value;
  } else if (name == "beta") {
    p.micro.beta = value;
  } else if (name == "alpha") {
    p.alpha = value;
  } else if (name == "gamma") {
    p.gamma = value;
  } else if (name == "eta") {
    p.eta = value;
  } else if (name == "epsilon0") {
    p.epsilon0 = value;
  } else if (name == "rho") {
    p.rho = value;
  } else {
    config_error("unknown agent parameter '" + name + "'");
  }
  return p;
}

bool ObservationMask::hides_action(Action a) const noexcept {
  return std::find(hidden_actions.begin(), hidden_actions.end(), a) != hidden_actions.end();
}

bool ObservationMask::hides_tau(int tau) const noexcept {
  return std::find(hidden_taus.begin(), hidden_taus.end(), tau) != hidden_taus.end();
}

void ObservationMask::validate(int max_interval) const {
  for (int tau : hidden_taus) {
    if (tau < 1 || tau > max_interval) config_error("mask hides an interval outside [1, L]");
  }
  if (std::all_of(kAllActions.begin(), kAllActions.end(),
                  [this](Action a) { return hides_action(a); })) {
    config_error("mask hides every action");
  }
}

std::vector<ObservationMask> default_scalability_masks() {
  using A = Action;
  const std::vector<int> two_to_eight{2, 3, 4, 5, 6, 7, 8};
  return {
      {},
      {{}, two_to_eight},
      {{A::kLong}, two_to_eight},
      {{A::kLong}, {}},
      {{A::kWait, A::kShort, A::kLong}, {}},
      {{A::kWait, A::kShort}, {4}},
  };
}

void to_json(json& j, const MicrostimuliConfig& v) {
  j = json{{"m", v.m}, {"xi", v.xi}, {"beta", v.beta}, {"zeta", v.zeta}};
}

void from_json(const json& j, MicrostimuliConfig& v) {
  check_keys(j, {"m", "xi", "beta", "zeta"}, "micro");
  read(j, "m", v.m);
  read(j, "xi", v.xi);
  read(j, "beta", v.beta);
  read(j, "zeta", v.zeta);
}

void to_json(json& j, const AgentParams& v) {
  j = json{{"alpha", v.alpha},
           {"gamma", v.gamma},
           {"eta", v.eta},
           {"epsilon0", v.epsilon0},
           {"rho", v.rho},
           {"weight_init_scale", v.weight_init_scale},
           {"micro", v.micro},
           {"update_order", order_name(v.update_order)},
           {"reward_deploys", v.reward_deploys}};
}

void from_json(const json& j, AgentParams& v) {
  check_keys(j,
             {"alpha", "gamma", "eta", "epsilon0", "rho", "weight_init_scale", "micro",
              "update_order", "reward_deploys"},
             "agent");
  read(j, "alpha", v.alpha);
  read(j, "gamma", v.gamma);
  read(j, "eta", v.eta);
  read(j, "epsilon0", v.epsilon0);
  read(j, "rho", v.rho);
  read(j, "weight_init_scale", v.weight_init_scale);
  read(j, "micro", v.micro);
  read(j, "reward_deploys", v.reward_deploys);
  std::string order(order_name(v.update_order));
  read(j, "update_order", order);
  if (order == "trace-first") {
    v.update_order = UpdateOrder::kTraceFirst;
  } else if (order == "weights-first") {
    v.update_order = UpdateOrder::kWeightsFirst;
  } else {
    config_error("update_order must be 'trace-first' or 'weights-first'");
  }
}

void to_json(json& j, const TaskConfig& v) {
  j = json{{"L", v.max_interval},
           {"seconds_per_step", v.seconds_per_step},
           {"reward_correct", v.reward_correct},
           {"reward_incorrect", v.reward_incorrect},
           {"reward_step", v.reward_step}};
}

void from_json(const json& j, TaskConfig& v) {
  check_keys(j, {"L", "seconds_per_step", "reward_correct", "reward_incorrect", "reward_step"},
             "task");
  read(j, "L", v.max_interval);
  read(j, "seconds_per_step", v.seconds_per_step);
  read(j, "reward_correct", v.reward_correct);
  read(j, "reward_incorrect", v.reward_incorrect);
  read(j, "reward_step", v.reward_step);
}

void to_json(json& j, const OUHyperparams& v) {
  j = json{{"lambda", v.lambda}, {"sigma", v.sigma}};
}

void from_json(const json& j, OUHyperparams& v) {
  check_keys(j, {"lambda", "sigma"}, "OU hyperparameters");
  read(j, "lambda", v.lambda);
  read(j, "sigma", v.sigma);
}

void to_json(json& j, const TimingConfig& v) {
  j = json{{"enabled", v.enabled},
           {"sensor", v.sensor},
           {"M", v.channels},
           {"N", v.samples},
           {"fit", v.fit},
           {"init", v.init},
           {"calibration_samples", v.calibration_samples},
           {"calibration_channels", v.calibration_channels}};
}

void from_json(const json& j, TimingConfig& v) {
  check_keys(j, {"enabled", "sensor", "M", "N", "fit", "init", "calibration_samples",
                 "calibration_channels"}, "timing");
  read(j, "enabled", v.enabled);
  read(j, "sensor", v.sensor);
  read(j, "M", v.channels);
  read(j, "N", v.samples);
  read(j, "fit", v.fit);
  read(j, "init", v.init);
  read(j, "calibration_samples", v.calibration_samples);
  read(j, "calibration_channels", v.calibration_channels);
}

void to_json(json& j, const ObservationMask& v) {
  std::vector<std::string> actions;
  for (Action a : v.hidden_actions) actions.emplace_back(action_name(a));
  j = json{{"hidden_actions", actions}, {"hidden_taus", v.hidden_taus}};
}

void from_json(const json& j, ObservationMask& v) {
  check_keys(j, {"hidden_actions", "hidden_taus"}, "mask");
  std::vector<std::string> actions;
  read(j, "hidden_actions", actions);
  v.hidden_actions.clear();
  for (const auto& a : actions) v.hidden_actions.push_back(parse_action(a));
  read(j, "hidden_taus", v.hidden_taus);
}

void to_json(json& j, const InferenceConfig& v) {
  j = json{{"parameter", v.parameter},
           {"candidates", v.candidates},
           {"truth", v.truth},
           {"train_sims", v.train_sims},
           {"train_episodes", v.train_episodes},
           {"test_sims", v.test_sims},
           {"test_episodes", v.test_episodes},
           {"pseudo_count", v.pseudo_count},
           {"per_episode_weighting", v.per_episode_weighting},
           {"epsilon_threshold", v.epsilon_threshold},
           {"episode_counts", v.episode_counts},
           {"curve_repetitions", v.curve_repetitions},
           {"match_model_episodes", v.match_model_episodes},
           {"noise_parameter", v.noise_parameter},
           {"noise_levels", v.noise_levels},
           {"sensitivity_train_sims", v.sensitivity_train_sims},
           {"sensitivity_test_sims", v.sensitivity_test_sims},
           {"masks", v.masks},
           {"scalability_test_sims", v.scalability_test_sims}};
}

void from_json(const json& j, InferenceConfig& v) {
  check_keys(j,
             {"parameter", "candidates", "truth", "train_sims", "train_episodes", "test_sims",
              "test_episodes", "pseudo_count", "per_episode_weighting", "epsilon_threshold",
              "episode_counts", "curve_repetitions", "match_model_episodes", "noise_parameter", "noise_levels",
              "sensitivity_train_sims", "sensitivity_test_sims", "masks",
              "scalability_test_sims"},
             "inference");
  read(j, "parameter", v.parameter);
  read(j, "candidates", v.candidates);
  read(j, "truth", v.truth);
  read(j, "train_sims", v.train_sims);
  read(j, "train_episodes", v.train_episodes);
  read(j, "test_sims", v.test_sims);
  read(j, "test_episodes", v.test_episodes);
  read(j, "pseudo_count", v.pseudo_count);
  read(j, "per_episode_weighting", v.per_episode_weighting);
  read(j, "epsilon_threshold", v.epsilon_threshold);
  read(j, "episode_counts", v.episode_counts);
  read(j, "curve_repetitions", v.curve_repetitions);
  read(j, "match_model_episodes", v.match_model_episodes);
  read(j, "noise_parameter", v.noise_parameter);
  read(j, "noise_levels", v.noise_levels);
  read(j, "sensitivity_train_sims", v.sensitivity_train_sims);
  read(j, "sensitivity_test_sims", v.sensitivity_test_sims);
  read(j, "masks", v.masks);
  read(j, "scalability_test_sims", v.scalability_test_sims);
}

void to_json(json& j, const ExperimentConfig& v) {
  j = json{{"experiment", v.experiment},
           {"agent", v.agent},
           {"task", v.task},
           {"timing", v.timing},
           {"episodes", v.episodes},
           {"eval_episodes", v.eval_episodes},
           {"seeds", v.seeds},
           {"probe_tau", v.probe_tau},
           {"q_trace_taus", v.q_trace_taus},
           {"timing_trials", v.timing_trials},
           {"inference", v.inference}};
}

void from_json(const json& j, ExperimentConfig& v) {
  check_keys(j,
             {"experiment", "agent", "task", "timing", "episodes", "eval_episodes", "seeds",
              "probe_tau", "q_trace_taus", "timing_trials", "inference"},
             "config");
  read(j, "experiment", v.experiment);
  read(j, "agent", v.agent);
  read(j, "task", v.task);
  read(j, "timing", v.timing);
  read(j, "episodes", v.episodes);
  read(j, "eval_episodes", v.eval_episodes);
  read(j, "seeds", v.seeds);
  read(j, "probe_tau", v.probe_tau);
  read(j, "q_trace_taus", v.q_trace_taus);
  read(j, "timing_trials", v.timing_trials);
  read(j, "inference", v.inference);
}

void ExperimentConfig::validate() const {
  if (std::find_if(std::begin(kExperimentNames), std::end(kExperimentNames),
                   [this](const char* n) { return experiment == n; }) ==
      std::end(kExperimentNames)) {
    config_error("unknown experiment '" + experiment + "'");
  }
  if (episodes < 1) config_error("episodes must be >= 1");
  if (eval_episodes < 1) config_error("eval_episodes must be >= 1");
  if (seeds.empty()) config_error("seeds must be nonempty");
  if (timing_trials < 1) config_error("timing_trials must be >= 1");
  try {
    agent.validate();
    task.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (probe_tau < 1 || probe_tau > task.max_interval) config_error("probe_tau outside [1, L]");
  for (int tau : q_trace_taus) {
    if (tau < 1 || tau > task.max_interval) config_error("q_trace_taus entry outside [1, L]");
  }
  if (timing.channels < 1) config_error("timing.M must be >= 1");
  if (timing.samples < 2) config_error("timing.N must be >= 2");
  if (timing.fit && timing.calibration_samples < 3) {
    config_error("timing.calibration_samples must be >= 3");
  }
  if (timing.fit && timing.calibration_channels < 1) {
    config_error("timing.calibration_channels must be >= 1");
  }
  if (!(timing.sensor.lambda > 0.0) || !(timing.sensor.sigma >= 0.0)) {
    config_error("timing.sensor hyperparameters out of range");
  }
  const InferenceConfig& inf = inference;
  if (inf.candidates.empty()) config_error("inference.candidates must be nonempty");
  try {
    for (double c : inf.candidates) with_parameter(agent, inf.parameter, c).validate();
    with_parameter(agent, inf.parameter, inf.truth).validate();
  } catch (const Error& e) {
    config_error(std::string("inference grid: ") + e.what());
  }
  if (inf.train_sims < 1 || inf.test_sims < 1 || inf.sensitivity_train_sims < 1 ||
      inf.sensitivity_test_sims < 1 || inf.scalability_test_sims < 1 ||
      inf.curve_repetitions < 1) {
    config_error("inference simulation counts must be >= 1");
  }
  if (inf.train_episodes < 1 || inf.test_episodes < 1) {
    config_error("inference episode counts must be >= 1");
  }
  for (int n : inf.episode_counts) {
    if (n < 1) config_error("inference.episode_counts entries must be >= 1");
  }
  if (!(inf.pseudo_count > 0.0)) config_error("inference.pseudo_count must be positive");
  if (inf.noise_parameter == "m") config_error("inference.noise_parameter cannot be m");
  get_parameter(agent, inf.noise_parameter);
  for (double n : inf.noise_levels) {
    if (!(n >= 0.0 && n < 1.0)) config_error("inference.noise_levels must lie in [0, 1)");
  }
  for (const ObservationMask& mask : inf.masks) mask.validate(task.max_interval);
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig config;
  from_json(j, config);
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& config) {
  return json(config).dump(2) + "\n";
}

}  // namespace tempo
