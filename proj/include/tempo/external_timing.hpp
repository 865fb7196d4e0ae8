#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tempo/rng.hpp"

namespace tempo {

// Ornstein-Uhlenbeck kernel hyperparameters.
struct OUHyperparams {
  double lambda = 1.0;  // inverse correlation length, > 0
  double sigma = 0.1;   // white-noise scale, >= 0
};

// M channels x N samples; channels are independent realizations.
struct SensorTrace {
  Eigen::MatrixXd values;

  Eigen::Index channels() const noexcept { return values.rows(); }
  Eigen::Index samples() const noexcept { return values.cols(); }
};

// Below this noise scale a fixed jitter is added to the Gram diagonal.
inline constexpr double kJitterThreshold = 1e-4;
inline constexpr double kJitter = 1e-8;

// exp(-lambda |gap|) + sigma^2 [gap == 0]. Throws for lambda <= 0.
double ou_kernel(double gap, const OUHyperparams& params);

// Gram matrix over n samples at times 0, spacing, 2*spacing, ...
Eigen::MatrixXd gram_matrix(Eigen::Index n, double spacing, const OUHyperparams& params);

// Sum over channels of log N(y_i; 0, K). Throws Error(kNumerical) when K is
// not positive definite.
double gp_log_likelihood(const SensorTrace& trace, const OUHyperparams& params,
                         double spacing = 1.0);

struct LikelihoodGradient {
  double d_lambda = 0.0;
  double d_sigma = 0.0;
};

// Gradient of gp_log_likelihood in (lambda, sigma), computed per channel as
// 0.5 tr((phi phi^T - K^-1) dK) with phi = K^-1 y.
LikelihoodGradient gp_log_likelihood_gradient(const SensorTrace& trace,
                                              const OUHyperparams& params,
                                              double spacing = 1.0);

struct FitOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // on the projected log-space gradient
  double lambda_min = 1e-4;
  double lambda_max = 1e4;
  double sigma_min = 1e-6;
  double sigma_max = 1e3;
  double spacing = 1.0;
};

struct FitResult {
  OUHyperparams params;
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool lambda_at_boundary = false;
  bool sigma_at_boundary = false;

  bool at_boundary() const noexcept { return lambda_at_boundary || sigma_at_boundary; }
};

// Maximizes gp_log_likelihood over (log lambda, log sigma) inside the option
// box by Fisher-preconditioned gradient ascent with backtracking. Throws
// Error(kOptimizerDivergence) if the likelihood becomes non-finite, with the
// iterate history in the message; Error(kUsage) if N < 3.
FitResult fit_hyperparameters(const SensorTrace& trace, const OUHyperparams& init,
                              const FitOptions& options = {});

// Maximum-likelihood elapsed time over a candidate grid. For a candidate tau
// the N samples are placed at equal spacing over [0, tau]. The Cholesky
// factor for each candidate is computed once at construction.
class ElapsedTimeEstimator {
 public:
  ElapsedTimeEstimator(const OUHyperparams& fitted, std::vector<int> candidates,
                       Eigen::Index samples);

  // Log-likelihood of the trace under each candidate, in candidate order.
  std::vector<double> log_likelihoods(const SensorTrace& trace) const;

  // Argmax; ties go to the smallest tau. Throws Error(kEstimation) when every
  // candidate likelihood is non-finite.
  int estimate(const SensorTrace& trace) const;

  const std::vector<int>& candidates() const noexcept { return candidates_; }
  Eigen::Index samples() const noexcept { return samples_; }
  const OUHyperparams& params() const noexcept { return params_; }

 private:
  struct Factor {
    Eigen::MatrixXd lower;
    double log_det = 0.0;
    bool ok = false;
  };

  OUHyperparams params_;
  std::vector<int> candidates_;
  Eigen::Index samples_;
  std::vector<Factor> factors_;
};

int estimate_elapsed_time(const SensorTrace& trace, const OUHyperparams& fitted,
                          std::span<const int> candidates);

// Exact draws of the zero-mean OU process (plus independent white noise of
// scale sigma) at n equally spaced times spanning [0, true_tau].
SensorTrace synthesize_trace(double true_tau, const OUHyperparams& params,
                             Eigen::Index channels, Eigen::Index samples, Rng& rng);

// CSV with header "channel,t_index,value", one row per sample.
void write_trace_csv(const SensorTrace& trace, const std::filesystem::path& path);
SensorTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace tempo
