#include "tempo/behavior_inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace tempo {

using nlohmann::json;

History history_from_logs(std::span<const EpisodeLog> logs, int first_episode) {
  History history;
  history.reserve(logs.size());
  int k = first_episode;
  for (const EpisodeLog& log : logs) {
    EpisodeActions entry{k++, log.tau, {}, {}};
    entry.actions.reserve(log.steps.size());
    entry.epsilons.reserve(log.steps.size());
    for (const StepLog& s : log.steps) {
      entry.actions.push_back(s.action);
      entry.epsilons.push_back(s.epsilon);
    }
    history.push_back(std::move(entry));
  }
  return history;
}

History simulate_history(const AgentParams& theta, const TaskConfig& task,
                         const TimingModel& timing, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw Error(ErrorCategory::kParameterDomain, "episodes must be >= 1");
  Simulation sim(theta, task, timing, seed);
  History history;
  history.reserve(static_cast<std::size_t>(episodes));
  for (int k = 0; k < episodes; ++k) {
    const EpisodeLog log = sim.run_episode(EpisodeMode::kTrain);
    auto part = history_from_logs(std::span<const EpisodeLog>(&log, 1), k);
    history.push_back(std::move(part.front()));
  }
  return history;
}

const ActionRow& ActionModel::row(int tau) const {
  if (tau < 1 || tau > max_interval || static_cast<std::size_t>(tau) > probs.size()) {
    throw Error(ErrorCategory::kCoverage,
                "interval " + std::to_string(tau) + " is not covered by the action model");
  }
  return probs[static_cast<std::size_t>(tau - 1)];
}

void normalize(ActionModel& model) {
  if (!(model.pseudo_count > 0.0)) {
    throw Error(ErrorCategory::kParameterDomain, "pseudo-count must be positive");
  }
  model.probs.resize(model.counts.size());
  for (std::size_t i = 0; i < model.counts.size(); ++i) {
    double total = 0.0;
    for (double c : model.counts[i]) total += c + model.pseudo_count;
    for (int a = 0; a < kNumActions; ++a) {
      model.probs[i][a] = (model.counts[i][a] + model.pseudo_count) / total;
    }
  }
}

std::vector<ActionRow> tally(const History& history, int max_interval) {
  std::vector<ActionRow> counts(static_cast<std::size_t>(max_interval), ActionRow{});
  for (const EpisodeActions& e : history) {
    if (e.tau < 1 || e.tau > max_interval) {
      throw Error(ErrorCategory::kCoverage, "history interval outside [1, L]");
    }
    auto& row = counts[static_cast<std::size_t>(e.tau - 1)];
    for (Action a : e.actions) row[index_of(a)] += 1.0;
  }
  return counts;
}

ActionModel model_from_histories(const AgentParams& theta, int max_interval,
                                 std::span<const History> histories, double pseudo_count,
                                 std::optional<double> epsilon_threshold,
                                 std::optional<int> episodes) {
  if (histories.empty()) throw Error(ErrorCategory::kUsage, "no training histories");
  ActionModel model;
  model.theta = theta;
  model.max_interval = max_interval;
  model.pseudo_count = pseudo_count;
  model.counts.assign(static_cast<std::size_t>(max_interval), ActionRow{});
  for (const History& full : histories) {
    History history = full;
    if (episodes && static_cast<std::size_t>(*episodes) < history.size()) {
      history.resize(static_cast<std::size_t>(*episodes));
    }
    if (epsilon_threshold) history = filter_exploratory(history, *epsilon_threshold);
    const auto counts = tally(history, max_interval);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (int a = 0; a < kNumActions; ++a) model.counts[i][a] += counts[i][a];
    }
  }
  for (auto& row : model.counts) {
    for (double& c : row) c /= static_cast<double>(histories.size());
  }
  normalize(model);
  return model;
}

ActionModel build_action_model(const AgentParams& theta, const TaskConfig& task,
                               const TimingModel& timing, const ModelOptions& options,
                               std::uint64_t seed) {
  if (options.train_sims < 1) throw Error(ErrorCategory::kParameterDomain, "train_sims must be >= 1");
  std::vector<History> histories;
  histories.reserve(static_cast<std::size_t>(options.train_sims));
  for (int s = 0; s < options.train_sims; ++s) {
    const std::uint64_t sim_seed = training_seed(seed, s);
    try {
      histories.push_back(simulate_history(theta, task, timing, options.episodes, sim_seed));
    } catch (const Error& e) {
      throw Error(e.category(), std::string(e.what()) + " (simulation seed " +
                                    std::to_string(sim_seed) + ")");
    }
  }
  return model_from_histories(theta, task.max_interval, histories, options.pseudo_count,
                              options.epsilon_threshold);
}

double history_nll(const History& history, const ActionModel& model, bool per_episode_weighting) {
  double nll = 0.0;
  for (const EpisodeActions& e : history) {
    const ActionRow& row = model.row(e.tau);
    double sum = 0.0;
    for (Action a : e.actions) sum -= std::log(row[index_of(a)]);
    if (per_episode_weighting && !e.actions.empty()) sum /= static_cast<double>(e.actions.size());
    nll += sum;
  }
  return nll;
}

MlEstimate ml_estimate(const History& history, std::span<const ActionModel> models,
                       bool per_episode_weighting) {
  if (models.empty()) throw Error(ErrorCategory::kUsage, "no candidate models");
  MlEstimate out;
  out.nll.reserve(models.size());
  for (const ActionModel& m : models) out.nll.push_back(history_nll(history, m, per_episode_weighting));
  const double best = *std::min_element(out.nll.begin(), out.nll.end());
  // Relative tolerance so that summation-order noise does not break ties.
  const double tol = 1e-12 * std::max(1.0, std::abs(best));
  for (std::size_t i = 0; i < out.nll.size(); ++i) {
    if (out.nll[i] - best <= tol) out.ties.push_back(i);
  }
  out.best = out.ties.front();
  return out;
}

History filter_exploratory(const History& history, double threshold) {
  History out;
  for (const EpisodeActions& e : history) {
    EpisodeActions kept{e.episode, e.tau, {}, {}};
    for (std::size_t i = 0; i < e.actions.size(); ++i) {
      if (e.epsilons[i] <= threshold) {
        kept.actions.push_back(e.actions[i]);
        kept.epsilons.push_back(e.epsilons[i]);
      }
    }
    if (!kept.actions.empty()) out.push_back(std::move(kept));
  }
  return out;
}

History filter_exploratory(const History& history, double threshold,
                           std::span<const double> schedule) {
  History relabeled = history;
  std::size_t t = 0;
  for (EpisodeActions& e : relabeled) {
    for (double& eps : e.epsilons) {
      if (t >= schedule.size()) {
        throw Error(ErrorCategory::kUsage, "exploration schedule shorter than the history");
      }
      eps = schedule[t++];
    }
  }
  return filter_exploratory(relabeled, threshold);
}

std::vector<double> epsilon_schedule(double epsilon0, double rho, std::size_t steps) {
  std::vector<double> out(steps);
  double eps = epsilon0;
  for (double& v : out) {
    v = eps;
    eps *= rho;
  }
  return out;
}

History apply_mask(const History& history, const ObservationMask& mask) {
  if (mask.empty()) return history;
  History out;
  for (const EpisodeActions& e : history) {
    if (mask.hides_tau(e.tau)) continue;
    EpisodeActions kept{e.episode, e.tau, {}, {}};
    for (std::size_t i = 0; i < e.actions.size(); ++i) {
      if (mask.hides_action(e.actions[i])) continue;
      kept.actions.push_back(e.actions[i]);
      kept.epsilons.push_back(e.epsilons[i]);
    }
    if (!kept.actions.empty()) out.push_back(std::move(kept));
  }
  return out;
}

void write_history_csv(const History& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::kIo, "cannot write " + path.string());
  out << "episode,tau,step,action,epsilon_t\n" << std::setprecision(17);
  for (const EpisodeActions& e : history) {
    for (std::size_t i = 0; i < e.actions.size(); ++i) {
      out << e.episode << ',' << e.tau << ',' << i << ',' << action_name(e.actions[i]) << ','
          << e.epsilons[i] << '\n';
    }
  }
  if (!out) throw Error(ErrorCategory::kIo, "failed writing " + path.string());
}

History read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "episode,tau,step,action,epsilon_t") {
    throw Error(ErrorCategory::kIo, "bad history header in " + path.string());
  }
  History history;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string episode, tau, step, action, eps;
    if (!std::getline(ss, episode, ',') || !std::getline(ss, tau, ',') ||
        !std::getline(ss, step, ',') || !std::getline(ss, action, ',') ||
        !std::getline(ss, eps)) {
      throw Error(ErrorCategory::kIo, "malformed history line " + std::to_string(lineno));
    }
    try {
      const int k = std::stoi(episode);
      const int t = std::stoi(tau);
      if (history.empty() || history.back().episode != k) history.push_back({k, t, {}, {}});
      history.back().actions.push_back(parse_action(action));
      history.back().epsilons.push_back(std::stod(eps));
    } catch (const std::logic_error&) {
      throw Error(ErrorCategory::kIo, "malformed history line " + std::to_string(lineno));
    }
  }
  return history;
}

json action_model_json(const ActionModel& model) {
  std::vector<std::string> actions;
  for (Action a : kAllActions) actions.emplace_back(action_name(a));
  json rows = json::object();
  json counts = json::object();
  for (std::size_t i = 0; i < model.probs.size(); ++i) {
    const std::string key = std::to_string(i + 1);
    rows[key] = model.probs[i];
    counts[key] = model.counts[i];
  }
  return json{{"theta", model.theta},
              {"L", model.max_interval},
              {"pseudo_count", model.pseudo_count},
              {"actions", actions},
              {"rows", rows},
              {"counts", counts}};
}

ActionModel action_model_from_json(const json& j) {
  try {
    ActionModel model;
    j.at("theta").get_to(model.theta);
    model.max_interval = j.at("L").get<int>();
    model.pseudo_count = j.value("pseudo_count", 0.5);
    const auto& counts = j.at("counts");
    model.counts.assign(static_cast<std::size_t>(model.max_interval), ActionRow{});
    for (int tau = 1; tau <= model.max_interval; ++tau) {
      counts.at(std::to_string(tau)).get_to(model.counts[static_cast<std::size_t>(tau - 1)]);
    }
    normalize(model);
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kIo, std::string("bad action model: ") + e.what());
  }
}

void write_action_model(const ActionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::kIo, "cannot write " + path.string());
  out << action_model_json(model).dump(2) << '\n';
}

ActionModel read_action_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kIo, std::string("bad action model JSON: ") + e.what());
  }
  return action_model_from_json(j);
}

}  // namespace tempo
