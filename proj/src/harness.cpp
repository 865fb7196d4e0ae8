#include "tempo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "tempo/error.hpp"

namespace tempo {

using nlohmann::json;

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::clamp(jobs, 1, n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mutex;
  int next = 0;
  auto worker = [&] {
    for (;;) {
      int i;
      {
        std::lock_guard<std::mutex> lock(mutex);
        if (next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

TimingSetup make_timing(const ExperimentConfig& config, std::uint64_t seed) {
  TimingSetup setup;
  if (!config.timing.enabled) {
    setup.model = TimingModel::exact();
    return setup;
  }
  const TimingConfig& t = config.timing;
  OUHyperparams fitted = t.init;
  if (t.fit) {
    Rng rng = make_stream(seed, Stream::kCalibration);
    // Unit-spaced calibration samples: the kernel is learned on the same
    // time scale the candidate grid uses.
    const SensorTrace trace =
        synthesize_trace(static_cast<double>(t.calibration_samples - 1), t.sensor,
                         t.calibration_channels, t.calibration_samples, rng);
    setup.fit = fit_hyperparameters(trace, t.init);
    fitted = setup.fit->params;
  }
  std::vector<int> candidates(static_cast<std::size_t>(config.task.max_interval));
  std::iota(candidates.begin(), candidates.end(), 1);
  setup.model.estimator =
      std::make_shared<const ElapsedTimeEstimator>(fitted, std::move(candidates), t.samples);
  setup.model.sensor = t.sensor;
  setup.model.channels = t.channels;
  return setup;
}

namespace {

Error with_context(const Error& e, const std::string& context) {
  return Error(e.category(), std::string(e.what()) + " (" + context + ")");
}

}  // namespace

TrainingRun run_training(const ExperimentConfig& config, const TimingModel& timing,
                         std::uint64_t seed, bool probes) {
  TrainingRun run{{}, {}, Simulation(config.agent, config.task, timing, seed)};
  run.episodes.reserve(static_cast<std::size_t>(config.episodes));
  if (probes) run.probes.reserve(static_cast<std::size_t>(config.episodes));
  for (int k = 0; k < config.episodes; ++k) {
    try {
      run.episodes.push_back(run.simulation.run_episode(EpisodeMode::kTrain));
      if (probes) {
        run.probes.push_back(run.simulation.run_episode(EpisodeMode::kProbe, config.probe_tau));
      }
    } catch (const Error& e) {
      throw with_context(e, "episode " + std::to_string(k) + ", seed " + std::to_string(seed));
    }
  }
  return run;
}

TdSignature td_signature(const std::vector<EpisodeLog>& probes) {
  TdSignature sig;
  const std::size_t n = probes.size();
  const std::size_t window = std::max<std::size_t>(1, n / 10);
  if (n == 0) return sig;
  auto accumulate = [&](std::size_t begin, double& reward_abs, double& tone) {
    double r = 0.0, t = 0.0;
    std::size_t count = 0;
    for (std::size_t k = begin; k < begin + window && k < n; ++k) {
      const auto& steps = probes[k].steps;
      if (steps.size() < 2) continue;
      r += std::abs(steps.back().delta);
      t += steps[steps.size() - 2].delta;
      ++count;
    }
    reward_abs = count ? r / count : 0.0;
    tone = count ? t / count : 0.0;
  };
  accumulate(0, sig.reward_abs_first, sig.tone_first);
  accumulate(n - window, sig.reward_abs_last, sig.tone_last);
  return sig;
}

double Psychometric::p_long(int tau) const {
  const auto i = static_cast<std::size_t>(tau - 1);
  return trials[i] ? static_cast<double>(long_count[i]) / trials[i] : 0.0;
}

double Psychometric::crossing() const {
  const int n = static_cast<int>(trials.size());
  if (n > 0 && p_long(1) >= 0.5) return 1.0;
  for (int tau = 2; tau <= n; ++tau) {
    const double p0 = p_long(tau - 1), p1 = p_long(tau);
    if (p0 < 0.5 && p1 >= 0.5) return (tau - 1) + (0.5 - p0) / (p1 - p0);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Psychometric evaluate_psychometric(Simulation& trained, int per_tau) {
  const int L = trained.task().max_interval;
  Psychometric out{std::vector<int>(static_cast<std::size_t>(L), 0),
                   std::vector<int>(static_cast<std::size_t>(L), 0),
                   std::vector<int>(static_cast<std::size_t>(L), 0)};
  for (int tau = 1; tau <= L; ++tau) {
    const auto i = static_cast<std::size_t>(tau - 1);
    for (int k = 0; k < per_tau; ++k) {
      const EpisodeLog log = trained.run_episode(EpisodeMode::kGreedy, tau);
      ++out.trials[i];
      if (log.choice() == Action::kLong) ++out.long_count[i];
      if (log.optimal(L)) ++out.optimal_count[i];
    }
  }
  return out;
}

int Misclassification::total() const { return std::accumulate(count.begin(), count.end(), 0); }

int Misclassification::mode_tau() const {
  if (total() == 0) return 0;
  return static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin()) + 1;
}

double Misclassification::median_tau() const {
  const int n = total();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  auto nth = [&](int rank) {
    int seen = 0;
    for (std::size_t i = 0; i < count.size(); ++i) {
      seen += count[i];
      if (seen > rank) return static_cast<double>(i + 1);
    }
    return static_cast<double>(count.size());
  };
  return n % 2 ? nth(n / 2) : 0.5 * (nth(n / 2 - 1) + nth(n / 2));
}

double Misclassification::mean_tau() const {
  const int n = total();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = 0; i < count.size(); ++i) s += static_cast<double>(i + 1) * count[i];
  return s / n;
}

Misclassification misclassifications(const std::vector<EpisodeLog>& episodes, int max_interval) {
  Misclassification out{std::vector<int>(static_cast<std::size_t>(max_interval), 0)};
  for (const EpisodeLog& log : episodes) {
    if (log.choice() && !log.correct(max_interval)) ++out.count[static_cast<std::size_t>(log.tau - 1)];
  }
  return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCategory::kUsage, "spearman needs two equal samples of size >= 2");
  }
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

TimingDemo run_timing_demo(const ExperimentConfig& config, const TimingModel& timing,
                           std::uint64_t seed) {
  const int L = config.task.max_interval;
  TimingDemo out;
  Rng rng = make_stream(seed, Stream::kEvaluation, 2);
  for (int tau = 1; tau <= L; ++tau) {
    std::vector<int> est;
    est.reserve(static_cast<std::size_t>(config.timing_trials));
    double sum = 0.0, sum_err = 0.0, sum_err2 = 0.0;
    for (int k = 0; k < config.timing_trials; ++k) {
      int tau_hat = tau;
      if (timing.estimator) {
        const SensorTrace trace = synthesize_trace(tau, timing.sensor, timing.channels,
                                                   timing.estimator->samples(), rng);
        tau_hat = timing.estimator->estimate(trace);
      }
      est.push_back(tau_hat);
      sum += tau_hat;
      sum_err += tau_hat - tau;
      sum_err2 += static_cast<double>(tau_hat - tau) * (tau_hat - tau);
    }
    const double n = config.timing_trials;
    out.mean.push_back(sum / n);
    const double var = n > 1 ? (sum_err2 - sum_err * sum_err / n) / (n - 1) : 0.0;
    out.stddev.push_back(std::sqrt(std::max(0.0, var)));
    out.estimates.push_back(std::move(est));
  }
  std::vector<double> taus(static_cast<std::size_t>(L));
  std::iota(taus.begin(), taus.end(), 1.0);
  out.spearman = L >= 2 ? spearman(taus, out.stddev) : 0.0;
  return out;
}

namespace {

const InferenceConfig& inf(const ExperimentConfig& c) { return c.inference; }

AgentParams candidate_theta(const ExperimentConfig& c, const AgentParams& base, double value) {
  return with_parameter(base, inf(c).parameter, value);
}

AgentParams truth_theta(const ExperimentConfig& c) {
  return with_parameter(c.agent, inf(c).parameter, inf(c).truth);
}

// Training histories of every candidate. All candidates share the same
// training seeds so that model differences come from the parameter alone.
std::vector<std::vector<History>> training_histories(const ExperimentConfig& c,
                                                     const AgentParams& base,
                                                     const TimingModel& timing, int sims,
                                                     int episodes, std::uint64_t seed, int jobs) {
  const auto& cand = inf(c).candidates;
  const int n_cand = static_cast<int>(cand.size());
  std::vector<std::vector<History>> out(cand.size(), std::vector<History>(static_cast<std::size_t>(sims)));
  const std::uint64_t model_seed = derive_seed(seed, static_cast<std::uint64_t>(Stream::kModel));
  parallel_for(n_cand * sims, jobs, [&](int cell) {
    const int i = cell / sims, s = cell % sims;
    const std::uint64_t sim_seed = training_seed(model_seed, s);
    try {
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] =
          simulate_history(candidate_theta(c, base, cand[static_cast<std::size_t>(i)]), c.task,
                           timing, episodes, sim_seed);
    } catch (const Error& e) {
      throw with_context(e, "training simulation seed " + std::to_string(sim_seed));
    }
  });
  return out;
}

std::vector<ActionModel> models_from(const ExperimentConfig& c, const AgentParams& base,
                                     const std::vector<std::vector<History>>& histories,
                                     std::optional<double> threshold = std::nullopt,
                                     std::optional<int> episodes = std::nullopt) {
  std::vector<ActionModel> models;
  models.reserve(histories.size());
  for (std::size_t i = 0; i < histories.size(); ++i) {
    models.push_back(model_from_histories(candidate_theta(c, base, inf(c).candidates[i]),
                                          c.task.max_interval, histories[i],
                                          inf(c).pseudo_count, threshold, episodes));
  }
  return models;
}

History test_history(const ExperimentConfig& c, const TimingModel& timing, std::uint64_t seed,
                     int index, int episodes) {
  const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(Stream::kTest),
                                      static_cast<std::uint64_t>(index));
  try {
    return simulate_history(truth_theta(c), c.task, timing, episodes, s);
  } catch (const Error& e) {
    throw with_context(e, "test simulation seed " + std::to_string(s));
  }
}

double estimated_value(const ExperimentConfig& c, const MlEstimate& e) {
  return inf(c).candidates[e.best];
}

double accuracy_of(const ExperimentConfig& c, const std::vector<double>& estimated) {
  return accuracy(std::span<const double>(estimated), inf(c).truth);
}

}  // namespace

InferenceRun run_inference(const ExperimentConfig& c, const TimingModel& timing,
                           std::uint64_t seed, int jobs) {
  InferenceRun run;
  run.models = models_from(c, c.agent,
                           training_histories(c, c.agent, timing, inf(c).train_sims,
                                              inf(c).train_episodes, seed, jobs));
  const int n = inf(c).test_sims;
  run.estimates.resize(static_cast<std::size_t>(n));
  parallel_for(n, jobs, [&](int t) {
    run.estimates[static_cast<std::size_t>(t)] =
        ml_estimate(test_history(c, timing, seed, t, inf(c).test_episodes), run.models,
                    inf(c).per_episode_weighting);
  });
  for (const auto& e : run.estimates) run.estimated.push_back(estimated_value(c, e));
  run.accuracy = accuracy_of(c, run.estimated);
  return run;
}

std::vector<CurvePoint> run_inference_curve(const ExperimentConfig& c, const TimingModel& timing,
                                            std::uint64_t seed, int jobs) {
  const auto& counts = inf(c).episode_counts;
  const int longest = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  const int train_len = std::max(inf(c).train_episodes, longest);
  const auto histories =
      training_histories(c, c.agent, timing, inf(c).train_sims, train_len, seed, jobs);
  const double threshold = inf(c).epsilon_threshold;
  std::vector<std::vector<ActionModel>> all, filtered;
  for (int n : counts) {
    const std::optional<int> len =
        inf(c).match_model_episodes ? std::optional<int>(n) : std::optional<int>(inf(c).train_episodes);
    all.push_back(models_from(c, c.agent, histories, std::nullopt, len));
    filtered.push_back(models_from(c, c.agent, histories, threshold, len));
  }
  const int reps = inf(c).curve_repetitions;
  // [rep][count] estimated values
  std::vector<std::vector<double>> est_all(static_cast<std::size_t>(reps)),
      est_filtered(static_cast<std::size_t>(reps));
  parallel_for(reps, jobs, [&](int r) {
    const History full = test_history(c, timing, seed, r, longest);
    auto& ea = est_all[static_cast<std::size_t>(r)];
    auto& ef = est_filtered[static_cast<std::size_t>(r)];
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const History prefix(full.begin(), full.begin() + std::min<std::ptrdiff_t>(
                                                            counts[k], static_cast<std::ptrdiff_t>(full.size())));
      ea.push_back(estimated_value(c, ml_estimate(prefix, all[k], inf(c).per_episode_weighting)));
      ef.push_back(estimated_value(
          c, ml_estimate(filter_exploratory(prefix, threshold), filtered[k],
                         inf(c).per_episode_weighting)));
    }
  });
  std::vector<CurvePoint> out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    std::vector<double> a, f;
    for (int r = 0; r < reps; ++r) {
      a.push_back(est_all[static_cast<std::size_t>(r)][k]);
      f.push_back(est_filtered[static_cast<std::size_t>(r)][k]);
    }
    out.push_back({counts[k], accuracy_of(c, a), accuracy_of(c, f)});
  }
  return out;
}

std::vector<SensitivityPoint> run_sensitivity(const ExperimentConfig& c, const TimingModel& timing,
                                              std::uint64_t seed, int jobs) {
  const int n_test = inf(c).sensitivity_test_sims;
  std::vector<History> tests(static_cast<std::size_t>(n_test));
  parallel_for(n_test, jobs, [&](int t) {
    tests[static_cast<std::size_t>(t)] = test_history(c, timing, seed, t, inf(c).test_episodes);
  });
  const double base = get_parameter(c.agent, inf(c).noise_parameter);
  auto accuracy_at = [&](double factor) {
    const AgentParams perturbed = with_parameter(c.agent, inf(c).noise_parameter, base * factor);
    const auto models = models_from(
        c, perturbed,
        training_histories(c, perturbed, timing, inf(c).sensitivity_train_sims,
                           inf(c).train_episodes, seed, jobs));
    std::vector<double> est;
    for (const History& h : tests) {
      est.push_back(estimated_value(c, ml_estimate(h, models, inf(c).per_episode_weighting)));
    }
    return accuracy_of(c, est);
  };
  std::vector<SensitivityPoint> out;
  for (double noise : inf(c).noise_levels) {
    SensitivityPoint p;
    p.noise = noise;
    p.accuracy_minus = accuracy_at(1.0 - noise);
    p.accuracy_plus = noise == 0.0 ? p.accuracy_minus : accuracy_at(1.0 + noise);
    p.accuracy = 0.5 * (p.accuracy_minus + p.accuracy_plus);
    out.push_back(p);
  }
  return out;
}

std::vector<ScalabilityRow> run_scalability(const ExperimentConfig& c, const TimingModel& timing,
                                            std::uint64_t seed, int jobs) {
  const auto models = models_from(
      c, c.agent,
      training_histories(c, c.agent, timing, inf(c).train_sims, inf(c).train_episodes, seed, jobs));
  const int n_test = inf(c).scalability_test_sims;
  std::vector<History> tests(static_cast<std::size_t>(n_test));
  parallel_for(n_test, jobs, [&](int t) {
    tests[static_cast<std::size_t>(t)] = test_history(c, timing, seed, t, inf(c).test_episodes);
  });
  const auto masks = inf(c).masks.empty() ? default_scalability_masks() : inf(c).masks;
  std::vector<ScalabilityRow> out;
  for (const auto& mask : masks) {
    mask.validate(c.task.max_interval);
    std::vector<double> est;
    for (const History& h : tests) {
      est.push_back(estimated_value(
          c, ml_estimate(apply_mask(h, mask), models, inf(c).per_episode_weighting)));
    }
    out.push_back({mask, accuracy_of(c, est)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace {

class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::string& header) : path_(path), out_(path) {
    if (!out_) throw Error(ErrorCategory::kIo, "cannot write " + path.string());
    out_ << header << '\n';
    out_.precision(10);
  }
  template <class... T>
  void row(const T&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << values, first = false), ...);
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw Error(ErrorCategory::kIo, "failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

std::string name(Action a) { return std::string(action_name(a)); }
std::string name(Phase p) { return std::string(phase_name(p)); }

std::string choice_name(const EpisodeLog& log) {
  const auto c = log.choice();
  return c ? name(*c) : "none";
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string join_actions(const std::vector<Action>& v) {
  std::string s;
  for (Action a : v) s += (s.empty() ? "" : " ") + name(a);
  return s.empty() ? "-" : s;
}

std::string join_taus(const std::vector<int>& v) {
  std::string s;
  for (int t : v) s += (s.empty() ? "" : " ") + std::to_string(t);
  return s.empty() ? "-" : s;
}

struct Writer {
  const ExperimentConfig& config;
  std::filesystem::path out;
  std::vector<std::string> files;

  Csv open(const std::string& file, const std::string& header) {
    if (std::find(files.begin(), files.end(), file) == files.end()) files.push_back(file);
    return Csv(out / file, header);
  }
  double seconds(int tau) const { return tau * config.task.seconds_per_step; }
};

void write_steps(Csv& csv, std::uint64_t seed, int episode, const EpisodeLog& log) {
  for (std::size_t s = 0; s < log.steps.size(); ++s) {
    const StepLog& st = log.steps[s];
    csv.row(seed, episode, log.tau, log.tau_hat, s, name(st.phase), name(st.action), st.reward,
            st.delta, st.epsilon, st.q[0], st.q[1], st.q[2], st.q[3]);
  }
}

constexpr const char* kStepHeader =
    "seed,episode,tau,tau_hat,step,phase,action,reward,delta,epsilon,q_start,q_wait,q_short,q_long";

json run_train(Writer& w, const TimingModel& timing, const std::vector<std::uint64_t>& seeds) {
  const ExperimentConfig& c = w.config;
  const int L = c.task.max_interval;
  auto episodes = w.open("episodes.csv",
                         "seed,episode,tau,tau_hat,steps,choice,correct,return,epsilon_end");
  auto steps = w.open("steps.csv", kStepHeader);
  auto eval = w.open("eval.csv", "seed,tau,episodes,optimal_rate,p_long");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    TrainingRun run = run_training(c, timing, seed);
    int correct_last = 0, last = 0;
    for (std::size_t k = 0; k < run.episodes.size(); ++k) {
      const EpisodeLog& log = run.episodes[k];
      double ret = 0.0;
      for (const auto& s : log.steps) ret += s.reward;
      const bool ok = log.correct(L);
      episodes.row(seed, k, log.tau, log.tau_hat, log.steps.size(), choice_name(log), ok ? 1 : 0,
                   ret, log.steps.empty() ? 0.0 : log.steps.back().epsilon);
      write_steps(steps, seed, static_cast<int>(k), log);
      if (k + run.episodes.size() / 10 >= run.episodes.size()) {
        ++last;
        correct_last += ok ? 1 : 0;
      }
    }
    const Psychometric p = evaluate_psychometric(run.simulation, std::max(1, c.eval_episodes / L));
    json optimal = json::object();
    for (int tau = 1; tau <= L; ++tau) {
      const auto i = static_cast<std::size_t>(tau - 1);
      const double rate = p.trials[i] ? static_cast<double>(p.optimal_count[i]) / p.trials[i] : 0.0;
      eval.row(seed, tau, p.trials[i], rate, p.p_long(tau));
      optimal[std::to_string(tau)] = rate;
    }
    summary.push_back({{"seed", seed},
                       {"final_accuracy", last ? static_cast<double>(correct_last) / last : 0.0},
                       {"final_epsilon", run.simulation.agent().epsilon},
                       {"greedy_optimal_rate", optimal}});
  }
  episodes.close();
  steps.close();
  eval.close();
  return summary;
}

json run_psychometric_out(Writer& w, const TimingModel& timing,
                          const std::vector<std::uint64_t>& seeds) {
  const ExperimentConfig& c = w.config;
  auto csv = w.open("psychometric.csv", "seed,tau,seconds,trials,p_long");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    TrainingRun run = run_training(c, timing, seed);
    const Psychometric p = evaluate_psychometric(run.simulation, c.eval_episodes);
    json curve = json::array();
    for (int tau = 1; tau <= c.task.max_interval; ++tau) {
      csv.row(seed, tau, w.seconds(tau), p.trials[static_cast<std::size_t>(tau - 1)], p.p_long(tau));
      curve.push_back(p.p_long(tau));
    }
    const double cross = p.crossing();
    summary.push_back({{"seed", seed},
                       {"p_long", curve},
                       {"crossing_tau", finite_or_null(cross)},
                       {"crossing_seconds", finite_or_null(cross * c.task.seconds_per_step)}});
  }
  csv.close();
  return summary;
}

json run_misclass_out(Writer& w, const TimingModel& timing,
                      const std::vector<std::uint64_t>& seeds) {
  const ExperimentConfig& c = w.config;
  auto csv = w.open("misclass.csv", "seed,tau,seconds,count");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    const TrainingRun run = run_training(c, timing, seed);
    const Misclassification m = misclassifications(run.episodes, c.task.max_interval);
    for (int tau = 1; tau <= c.task.max_interval; ++tau) {
      csv.row(seed, tau, w.seconds(tau), m.count[static_cast<std::size_t>(tau - 1)]);
    }
    summary.push_back({{"seed", seed},
                       {"total", m.total()},
                       {"mode_tau", m.mode_tau()},
                       {"median_seconds", finite_or_null(m.median_tau() * c.task.seconds_per_step)},
                       {"mean_seconds", finite_or_null(m.mean_tau() * c.task.seconds_per_step)}});
  }
  csv.close();
  return summary;
}

json run_td_trace_out(Writer& w, const TimingModel& timing,
                      const std::vector<std::uint64_t>& seeds) {
  const ExperimentConfig& c = w.config;
  auto csv = w.open("td_trace.csv", "seed,episode,step,phase,action,reward,delta");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    const TrainingRun run = run_training(c, timing, seed, true);
    for (std::size_t k = 0; k < run.probes.size(); ++k) {
      const auto& log = run.probes[k];
      for (std::size_t s = 0; s < log.steps.size(); ++s) {
        const auto& st = log.steps[s];
        csv.row(seed, k, s, name(st.phase), name(st.action), st.reward, st.delta);
      }
    }
    const TdSignature sig = td_signature(run.probes);
    summary.push_back({{"seed", seed},
                       {"probe_tau", c.probe_tau},
                       {"reward_abs_delta_first", sig.reward_abs_first},
                       {"reward_abs_delta_last", sig.reward_abs_last},
                       {"tone_delta_first", sig.tone_first},
                       {"tone_delta_last", sig.tone_last},
                       {"signature_holds", sig.holds()}});
  }
  csv.close();
  return summary;
}

json run_q_trace_out(Writer& w, const TimingModel& timing,
                     const std::vector<std::uint64_t>& seeds) {
  const ExperimentConfig& c = w.config;
  auto csv = w.open("q_trace.csv",
                    "seed,tau,tau_hat,step,phase,action,q_start,q_wait,q_short,q_long");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    TrainingRun run = run_training(c, timing, seed);
    json finals = json::object();
    for (int tau : c.q_trace_taus) {
      const EpisodeLog log = run.simulation.run_episode(EpisodeMode::kGreedy, tau);
      for (std::size_t s = 0; s < log.steps.size(); ++s) {
        const auto& st = log.steps[s];
        csv.row(seed, tau, log.tau_hat, s, name(st.phase), name(st.action), st.q[0], st.q[1],
                st.q[2], st.q[3]);
      }
      finals[std::to_string(tau)] = choice_name(log);
    }
    summary.push_back({{"seed", seed}, {"final_greedy_action", finals}});
  }
  csv.close();
  return summary;
}

json run_timing_out(Writer& w, const std::vector<std::uint64_t>& seeds) {
  const ExperimentConfig& c = w.config;
  auto trials = w.open("timing_trials.csv", "seed,tau,trial,tau_hat,error");
  auto stats = w.open("timing.csv", "seed,tau,seconds,mean_tau_hat,std_error,within_one");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    const TimingSetup setup = make_timing(c, seed);
    const TimingDemo demo = run_timing_demo(c, setup.model, seed);
    for (int tau = 1; tau <= c.task.max_interval; ++tau) {
      const auto& est = demo.estimates[static_cast<std::size_t>(tau - 1)];
      int within = 0;
      for (std::size_t k = 0; k < est.size(); ++k) {
        trials.row(seed, tau, k, est[k], est[k] - tau);
        within += std::abs(est[k] - tau) <= 1 ? 1 : 0;
      }
      stats.row(seed, tau, w.seconds(tau), demo.mean[static_cast<std::size_t>(tau - 1)],
                demo.stddev[static_cast<std::size_t>(tau - 1)],
                static_cast<double>(within) / static_cast<double>(est.size()));
    }
    json entry = {{"seed", seed}, {"std_error", demo.stddev}, {"spearman", demo.spearman}};
    if (setup.fit) {
      entry["fitted"] = setup.fit->params;
      entry["fit_converged"] = setup.fit->converged;
      entry["fit_at_boundary"] = setup.fit->at_boundary();
    }
    summary.push_back(entry);
  }
  trials.close();
  stats.close();
  return summary;
}

json run_infer_out(Writer& w, const TimingModel& timing, const std::vector<std::uint64_t>& seeds,
                   int jobs) {
  const ExperimentConfig& c = w.config;
  auto profile = w.open("infer_profile.csv", "seed,test,candidate,nll,nll_minus_best");
  auto est = w.open("infer.csv", "seed,test,estimate,ties,correct");
  std::filesystem::create_directories(w.out / "models");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    const InferenceRun run = run_inference(c, timing, seed, jobs);
    for (std::size_t t = 0; t < run.estimates.size(); ++t) {
      const MlEstimate& e = run.estimates[t];
      const double best = e.nll[e.best];
      for (std::size_t i = 0; i < e.nll.size(); ++i) {
        profile.row(seed, t, c.inference.candidates[i], e.nll[i], e.nll[i] - best);
      }
      std::string ties;
      for (std::size_t i : e.ties) {
        std::ostringstream v;
        v << c.inference.candidates[i];
        ties += (ties.empty() ? "" : " ") + v.str();
      }
      est.row(seed, t, run.estimated[t], ties, run.estimated[t] == c.inference.truth ? 1 : 0);
    }
    for (std::size_t i = 0; i < run.models.size(); ++i) {
      const std::string file = "models/seed" + std::to_string(seed) + "_candidate" +
                               std::to_string(i) + ".json";
      write_action_model(run.models[i], w.out / file);
      w.files.push_back(file);
    }
    summary.push_back({{"seed", seed}, {"parameter", c.inference.parameter},
                       {"truth", c.inference.truth}, {"accuracy", run.accuracy}});
  }
  profile.close();
  est.close();
  return summary;
}

json run_curve_out(Writer& w, const TimingModel& timing, const std::vector<std::uint64_t>& seeds,
                   int jobs) {
  auto csv = w.open("infer_curve.csv", "seed,episodes,accuracy,accuracy_filtered");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    json points = json::array();
    for (const CurvePoint& p : run_inference_curve(w.config, timing, seed, jobs)) {
      csv.row(seed, p.episodes, p.accuracy, p.accuracy_filtered);
      points.push_back({{"episodes", p.episodes},
                        {"accuracy", p.accuracy},
                        {"accuracy_filtered", p.accuracy_filtered}});
    }
    summary.push_back({{"seed", seed}, {"curve", points}});
  }
  csv.close();
  return summary;
}

json run_sensitivity_out(Writer& w, const TimingModel& timing,
                         const std::vector<std::uint64_t>& seeds, int jobs) {
  auto csv = w.open("sensitivity.csv", "seed,parameter,noise,accuracy_minus,accuracy_plus,accuracy");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    json points = json::array();
    for (const SensitivityPoint& p : run_sensitivity(w.config, timing, seed, jobs)) {
      csv.row(seed, w.config.inference.noise_parameter, p.noise, p.accuracy_minus,
              p.accuracy_plus, p.accuracy);
      points.push_back({{"noise", p.noise}, {"accuracy", p.accuracy}});
    }
    summary.push_back({{"seed", seed}, {"points", points}});
  }
  csv.close();
  return summary;
}

json run_scalability_out(Writer& w, const TimingModel& timing,
                         const std::vector<std::uint64_t>& seeds, int jobs) {
  auto csv = w.open("scalability.csv", "seed,row,hidden_actions,hidden_taus,accuracy");
  json summary = json::array();
  for (std::uint64_t seed : seeds) {
    json rows = json::array();
    const auto result = run_scalability(w.config, timing, seed, jobs);
    for (std::size_t r = 0; r < result.size(); ++r) {
      csv.row(seed, r + 1, join_actions(result[r].mask.hidden_actions),
              join_taus(result[r].mask.hidden_taus), result[r].accuracy);
      rows.push_back({{"mask", result[r].mask}, {"accuracy", result[r].accuracy}});
    }
    summary.push_back({{"seed", seed}, {"rows", rows}});
  }
  csv.close();
  return summary;
}

}  // namespace

json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out, int jobs) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw Error(ErrorCategory::kIo, "cannot create " + out.string() + ": " + ec.message());
  Writer w{config, out, {}};
  const auto& seeds = config.seeds;
  const std::string& e = config.experiment;

  json summary;
  if (e == "timing-demo") {
    summary = run_timing_out(w, seeds);
  } else {
    // One perception model per run, fitted on the first seed's calibration stream.
    const TimingModel timing = make_timing(config, seeds.front()).model;
    if (e == "train") summary = run_train(w, timing, seeds);
    else if (e == "psychometric") summary = run_psychometric_out(w, timing, seeds);
    else if (e == "misclass") summary = run_misclass_out(w, timing, seeds);
    else if (e == "td-trace") summary = run_td_trace_out(w, timing, seeds);
    else if (e == "q-trace") summary = run_q_trace_out(w, timing, seeds);
    else if (e == "infer") summary = run_infer_out(w, timing, seeds, jobs);
    else if (e == "infer-curve") summary = run_curve_out(w, timing, seeds, jobs);
    else if (e == "sensitivity") summary = run_sensitivity_out(w, timing, seeds, jobs);
    else if (e == "scalability") summary = run_scalability_out(w, timing, seeds, jobs);
    else throw Error(ErrorCategory::kInternal, "no runner for experiment '" + e + "'");
  }

  {
    std::ofstream cfg(out / "config.json");
    cfg << dump_config(config);
    if (!cfg) throw Error(ErrorCategory::kIo, "failed writing config.json");
  }
  w.files.push_back("config.json");
  json manifest = {{"experiment", e},
                   {"version", kVersion},
                   {"seeds", seeds},
                   {"files", w.files},
                   {"summary", summary}};
  std::ofstream m(out / "manifest.json");
  m << manifest.dump(2) << '\n';
  if (!m) throw Error(ErrorCategory::kIo, "failed writing manifest.json");
  return manifest;
}

}  // namespace tempo
