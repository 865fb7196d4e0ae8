#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/behavior_inference.hpp"
#include "tempo/config.hpp"
#include "tempo/simulation.hpp"

namespace tempo {

inline constexpr const char* kVersion = "0.1.0";

// Runs fn(0..n-1) on up to `jobs` threads. Each index must write only its own
// output slot, which keeps results independent of scheduling. The first
// exception thrown (lowest index) is rethrown after all workers finish.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

// Builds the perception model of a run: exact when timing is disabled,
// otherwise an estimator whose hyperparameters are fitted on a calibration
// stream derived from the seed (or taken from timing.init when fit is off).
struct TimingSetup {
  TimingModel model;
  std::optional<FitResult> fit;
};
TimingSetup make_timing(const ExperimentConfig& config, std::uint64_t seed);

struct TrainingRun {
  std::vector<EpisodeLog> episodes;
  std::vector<EpisodeLog> probes;  // one per training episode when requested
  Simulation simulation;           // the trained agent
};

// Trains for config.episodes. With probes, a probe_tau episode following the
// optimal sequence (no learning) is run after every training episode.
TrainingRun run_training(const ExperimentConfig& config, const TimingModel& timing,
                         std::uint64_t seed, bool probes = false);

struct TdSignature {
  double reward_abs_first = 0.0;  // mean |delta| at the reward step, first 10%
  double reward_abs_last = 0.0;
  double tone_first = 0.0;        // mean delta at the second tone, first 10%
  double tone_last = 0.0;
  bool holds() const noexcept {
    return reward_abs_last < 0.25 * reward_abs_first && tone_last > tone_first;
  }
};
TdSignature td_signature(const std::vector<EpisodeLog>& probes);

struct Psychometric {
  std::vector<int> trials;      // per tau, index tau-1
  std::vector<int> long_count;
  std::vector<int> optimal_count;
  double p_long(int tau) const;
  // Linear interpolation of the first 0.5 crossing in tau; NaN if none.
  double crossing() const;
};
// Greedy episodes of the trained agent, `per_tau` for every tau.
Psychometric evaluate_psychometric(Simulation& trained, int per_tau);

struct Misclassification {
  std::vector<int> count;  // per tau, index tau-1
  int total() const;
  int mode_tau() const;          // 0 when empty
  double median_tau() const;     // NaN when empty
  double mean_tau() const;       // NaN when empty
};
Misclassification misclassifications(const std::vector<EpisodeLog>& episodes, int max_interval);

struct TimingDemo {
  std::vector<std::vector<int>> estimates;  // [tau-1][trial]
  std::vector<double> mean;                 // per tau, of tau_hat
  std::vector<double> stddev;               // per tau, of tau_hat - tau
  double spearman = 0.0;                    // between tau and stddev
};
TimingDemo run_timing_demo(const ExperimentConfig& config, const TimingModel& timing,
                           std::uint64_t seed);

double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct InferenceRun {
  std::vector<ActionModel> models;  // candidate order
  std::vector<MlEstimate> estimates;
  std::vector<double> estimated;    // parameter value per test simulation
  double accuracy = 0.0;
};
InferenceRun run_inference(const ExperimentConfig& config, const TimingModel& timing,
                           std::uint64_t seed, int jobs);

struct CurvePoint {
  int episodes = 0;
  double accuracy = 0.0;           // all actions
  double accuracy_filtered = 0.0;  // low-exploration actions only
};
std::vector<CurvePoint> run_inference_curve(const ExperimentConfig& config,
                                            const TimingModel& timing, std::uint64_t seed,
                                            int jobs);

struct SensitivityPoint {
  double noise = 0.0;
  double accuracy_minus = 0.0;
  double accuracy_plus = 0.0;
  double accuracy = 0.0;  // mean of the two signs
};
std::vector<SensitivityPoint> run_sensitivity(const ExperimentConfig& config,
                                              const TimingModel& timing, std::uint64_t seed,
                                              int jobs);

struct ScalabilityRow {
  ObservationMask mask;
  double accuracy = 0.0;
};
std::vector<ScalabilityRow> run_scalability(const ExperimentConfig& config,
                                            const TimingModel& timing, std::uint64_t seed,
                                            int jobs);

// Runs config.experiment once per seed, writes CSVs, config.json and
// manifest.json into `out`, and returns the manifest.
nlohmann::json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out,
                              int jobs);

}  // namespace tempo
