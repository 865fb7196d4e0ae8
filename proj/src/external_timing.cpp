#include "tempo/external_timing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "tempo/error.hpp"

namespace tempo {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_params(const OUHyperparams& p) {
  if (!(p.lambda > 0.0)) {
    throw Error(ErrorCategory::kParameterDomain, "OU lambda must be positive");
  }
  if (!(p.sigma >= 0.0)) {
    throw Error(ErrorCategory::kParameterDomain, "OU sigma must be nonnegative");
  }
}

double diagonal_jitter(const OUHyperparams& p) {
  return p.sigma < kJitterThreshold ? kJitter : 0.0;
}

// Returns false when K is not numerically positive definite.
bool factorize(const Eigen::MatrixXd& k, Eigen::LLT<Eigen::MatrixXd>& llt) {
  llt.compute(k);
  return llt.info() == Eigen::Success;
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double log_likelihood_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt,
                               const Eigen::MatrixXd& values) {
  const Eigen::Index n = values.cols();
  const Eigen::Index m = values.rows();
  // Solve L z = y for every channel at once; quad form is ||z||^2.
  const Eigen::MatrixXd z = llt.matrixL().solve(values.transpose());
  const double quad = z.squaredNorm();
  return -0.5 * quad - 0.5 * static_cast<double>(m) * (log_det_from_llt(llt) + n * kLog2Pi);
}

void check_trace(const SensorTrace& trace) {
  if (trace.channels() < 1 || trace.samples() < 1) {
    throw Error(ErrorCategory::kUsage, "sensor trace is empty");
  }
}

// Derivatives of the Gram matrix with respect to lambda and sigma.
Eigen::MatrixXd gram_d_lambda(Eigen::Index n, double spacing, const OUHyperparams& p) {
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double gap = std::abs(static_cast<double>(i - j)) * spacing;
      d(i, j) = -gap * std::exp(-p.lambda * gap);
    }
  }
  return d;
}

struct Evaluation {
  double log_likelihood = -std::numeric_limits<double>::infinity();
  // Gradient and Fisher information with respect to (log lambda, log sigma).
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d fisher = Eigen::Matrix2d::Zero();
  bool ok = false;
};

Evaluation evaluate(const SensorTrace& trace, const OUHyperparams& p, double spacing,
                    bool with_derivatives) {
  Evaluation ev;
  const Eigen::Index n = trace.samples();
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!factorize(gram_matrix(n, spacing, p), llt)) return ev;
  ev.log_likelihood = log_likelihood_from_llt(llt, trace.values);
  if (!std::isfinite(ev.log_likelihood)) return ev;
  ev.ok = true;
  if (!with_derivatives) return ev;

  const double m = static_cast<double>(trace.channels());
  const Eigen::MatrixXd k_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd phi = llt.solve(trace.values.transpose());  // n x M
  const Eigen::MatrixXd phi_outer = phi * phi.transpose();
  // dK/dlog(lambda) and dK/dlog(sigma)
  const Eigen::MatrixXd d_log_lambda = p.lambda * gram_d_lambda(n, spacing, p);
  const Eigen::MatrixXd d_log_sigma =
      (2.0 * p.sigma * p.sigma) * Eigen::MatrixXd::Identity(n, n);

  const Eigen::MatrixXd core = phi_outer - m * k_inv;
  ev.gradient(0) = 0.5 * core.cwiseProduct(d_log_lambda).sum();
  ev.gradient(1) = 0.5 * core.cwiseProduct(d_log_sigma).sum();

  const Eigen::MatrixXd a = k_inv * d_log_lambda;
  const Eigen::MatrixXd b = k_inv * d_log_sigma;
  ev.fisher(0, 0) = 0.5 * m * a.cwiseProduct(a.transpose()).sum();
  ev.fisher(1, 1) = 0.5 * m * b.cwiseProduct(b.transpose()).sum();
  ev.fisher(0, 1) = ev.fisher(1, 0) = 0.5 * m * a.cwiseProduct(b.transpose()).sum();
  if (!ev.gradient.allFinite()) ev.ok = false;
  return ev;
}

}  // namespace

double ou_kernel(double gap, const OUHyperparams& params) {
  check_params(params);
  const double base = std::exp(-params.lambda * std::abs(gap));
  return gap == 0.0 ? base + params.sigma * params.sigma : base;
}

Eigen::MatrixXd gram_matrix(Eigen::Index n, double spacing, const OUHyperparams& params) {
  check_params(params);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = ou_kernel(static_cast<double>(i - j) * spacing, params);
    }
  }
  k.diagonal().array() += diagonal_jitter(params);
  return k;
}

double gp_log_likelihood(const SensorTrace& trace, const OUHyperparams& params,
                         double spacing) {
  check_trace(trace);
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!factorize(gram_matrix(trace.samples(), spacing, params), llt)) {
    throw Error(ErrorCategory::kNumerical,
                "OU Gram matrix is not positive definite (Cholesky failed)");
  }
  return log_likelihood_from_llt(llt, trace.values);
}

LikelihoodGradient gp_log_likelihood_gradient(const SensorTrace& trace,
                                              const OUHyperparams& params,
                                              double spacing) {
  check_trace(trace);
  const Evaluation ev = evaluate(trace, params, spacing, true);
  if (!ev.ok) {
    throw Error(ErrorCategory::kNumerical,
                "OU Gram matrix is not positive definite (Cholesky failed)");
  }
  LikelihoodGradient g;
  g.d_lambda = ev.gradient(0) / params.lambda;
  g.d_sigma = params.sigma > 0.0 ? ev.gradient(1) / params.sigma : 0.0;
  return g;
}

namespace {
constexpr double kNegligibleGain = 1e-10;
}  // namespace

FitResult fit_hyperparameters(const SensorTrace& trace, const OUHyperparams& init,
                              const FitOptions& options) {
  check_trace(trace);
  check_params(init);
  if (trace.samples() < 3) {
    throw Error(ErrorCategory::kUsage, "hyperparameter fit needs at least 3 samples per channel");
  }
  const Eigen::Vector2d lo(std::log(options.lambda_min), std::log(options.sigma_min));
  const Eigen::Vector2d hi(std::log(options.lambda_max), std::log(options.sigma_max));
  auto to_params = [](const Eigen::Vector2d& u) {
    return OUHyperparams{std::exp(u(0)), std::exp(u(1))};
  };

  std::ostringstream history;
  auto record = [&history](int it, const Eigen::Vector2d& u, double ll) {
    history << "  iter " << it << ": lambda=" << std::exp(u(0))
            << " sigma=" << std::exp(u(1)) << " loglik=" << ll << '\n';
  };
  auto diverged = [&history]() {
    return Error(ErrorCategory::kOptimizerDivergence,
                 "non-finite likelihood during hyperparameter search; iterates:\n" +
                     history.str());
  };

  Eigen::Vector2d u(std::log(std::max(init.lambda, options.lambda_min)),
                    std::log(std::max(init.sigma, options.sigma_min)));
  u = u.cwiseMax(lo).cwiseMin(hi);
  Evaluation ev = evaluate(trace, to_params(u), options.spacing, true);
  record(0, u, ev.log_likelihood);
  if (!ev.ok) throw diverged();

  FitResult result;
  result.initial_log_likelihood = ev.log_likelihood;

  // Zero gradient components that push against an active bound.
  auto project = [&](const Eigen::Vector2d& g, const Eigen::Vector2d& at) {
    Eigen::Vector2d pg = g;
    for (int i = 0; i < 2; ++i) {
      if ((at(i) <= lo(i) && g(i) < 0.0) || (at(i) >= hi(i) && g(i) > 0.0)) pg(i) = 0.0;
    }
    return pg;
  };

  int it = 0;
  double scale = 1.0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::Vector2d pg = project(ev.gradient, u);
    if (pg.norm() <= options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    // Fisher-preconditioned ascent direction on the free coordinates.
    Eigen::Matrix2d metric = ev.fisher;
    for (int i = 0; i < 2; ++i) {
      if (pg(i) == 0.0) {
        metric.row(i).setZero();
        metric.col(i).setZero();
        metric(i, i) = 1.0;
      }
    }
    metric.diagonal().array() += 1e-9 * (1.0 + metric.diagonal().cwiseAbs().maxCoeff());
    Eigen::Vector2d direction = metric.ldlt().solve(pg);
    if (!direction.allFinite() || direction.dot(pg) <= 0.0) direction = pg;
    // Predicted gain below what the likelihood can resolve: a flat valley,
    // not a failure.
    if (0.5 * direction.dot(pg) <= kNegligibleGain) {
      result.converged = true;
      break;
    }

    bool accepted = false;
    bool saw_nonfinite = false;
    double step = std::min(1.0, 2.0 * scale);
    for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
      const Eigen::Vector2d trial = (u + step * direction).cwiseMax(lo).cwiseMin(hi);
      const Evaluation tev = evaluate(trace, to_params(trial), options.spacing, true);
      if (!tev.ok) {
        saw_nonfinite = true;
        continue;
      }
      const double predicted = pg.dot(trial - u);
      if (tev.log_likelihood >= ev.log_likelihood + 1e-4 * predicted &&
          tev.log_likelihood >= ev.log_likelihood) {
        u = trial;
        ev = tev;
        scale = step;
        accepted = true;
        break;
      }
    }
    record(it + 1, u, ev.log_likelihood);
    if (!accepted) {
      if (saw_nonfinite && pg.norm() > 1e3 * options.gradient_tolerance) throw diverged();
      // No ascent possible at floating-point resolution.
      break;
    }
  }

  result.params = to_params(u);
  result.log_likelihood = ev.log_likelihood;
  result.gradient_norm = project(ev.gradient, u).norm();
  result.iterations = it;
  result.converged = result.converged || result.gradient_norm <= options.gradient_tolerance;
  result.lambda_at_boundary = u(0) <= lo(0) || u(0) >= hi(0);
  result.sigma_at_boundary = u(1) <= lo(1) || u(1) >= hi(1);
  return result;
}

ElapsedTimeEstimator::ElapsedTimeEstimator(const OUHyperparams& fitted,
                                           std::vector<int> candidates,
                                           Eigen::Index samples)
    : params_(fitted), candidates_(std::move(candidates)), samples_(samples) {
  check_params(params_);
  if (candidates_.empty()) {
    throw Error(ErrorCategory::kUsage, "elapsed-time candidate set is empty");
  }
  if (samples_ < 1) {
    throw Error(ErrorCategory::kUsage, "elapsed-time estimator needs at least one sample");
  }
  factors_.reserve(candidates_.size());
  for (int tau : candidates_) {
    if (tau <= 0) {
      throw Error(ErrorCategory::kParameterDomain, "candidate intervals must be positive");
    }
    const double spacing =
        samples_ > 1 ? static_cast<double>(tau) / static_cast<double>(samples_ - 1) : 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt;
    Factor f;
    f.ok = factorize(gram_matrix(samples_, spacing, params_), llt);
    if (f.ok) {
      f.lower = llt.matrixL();
      f.log_det = log_det_from_llt(llt);
    }
    factors_.push_back(std::move(f));
  }
}

std::vector<double> ElapsedTimeEstimator::log_likelihoods(const SensorTrace& trace) const {
  if (trace.samples() != samples_) {
    throw Error(ErrorCategory::kUsage, "trace sample count does not match the estimator");
  }
  const double m = static_cast<double>(trace.channels());
  const Eigen::MatrixXd yt = trace.values.transpose();
  std::vector<double> out;
  out.reserve(factors_.size());
  for (const Factor& f : factors_) {
    if (!f.ok) {
      out.push_back(-std::numeric_limits<double>::infinity());
      continue;
    }
    const Eigen::MatrixXd z = f.lower.triangularView<Eigen::Lower>().solve(yt);
    out.push_back(-0.5 * z.squaredNorm() -
                  0.5 * m * (f.log_det + static_cast<double>(samples_) * kLog2Pi));
  }
  return out;
}

int ElapsedTimeEstimator::estimate(const SensorTrace& trace) const {
  const std::vector<double> ll = log_likelihoods(trace);
  int best = -1;
  for (std::size_t i = 0; i < ll.size(); ++i) {
    if (!std::isfinite(ll[i])) continue;
    if (best < 0 || ll[i] > ll[best] ||
        (ll[i] == ll[best] && candidates_[i] < candidates_[best])) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    throw Error(ErrorCategory::kEstimation, "every candidate interval has non-finite likelihood");
  }
  return candidates_[best];
}

int estimate_elapsed_time(const SensorTrace& trace, const OUHyperparams& fitted,
                          std::span<const int> candidates) {
  check_trace(trace);
  ElapsedTimeEstimator estimator(fitted, std::vector<int>(candidates.begin(), candidates.end()),
                                 trace.samples());
  return estimator.estimate(trace);
}

SensorTrace synthesize_trace(double true_tau, const OUHyperparams& params,
                             Eigen::Index channels, Eigen::Index samples, Rng& rng) {
  check_params(params);
  if (channels < 1 || samples < 1) {
    throw Error(ErrorCategory::kUsage, "trace needs at least one channel and one sample");
  }
  const double spacing =
      samples > 1 ? true_tau / static_cast<double>(samples - 1) : 0.0;
  // Equally spaced OU samples form an exact AR(1) chain.
  const double phi = std::exp(-params.lambda * spacing);
  const double innovation = std::sqrt(std::max(0.0, 1.0 - phi * phi));
  NormalSampler normal;
  SensorTrace trace;
  trace.values.resize(channels, samples);
  for (Eigen::Index c = 0; c < channels; ++c) {
    double z = normal(rng);
    for (Eigen::Index k = 0; k < samples; ++k) {
      if (k > 0) z = phi * z + innovation * normal(rng);
      trace.values(c, k) = z + params.sigma * normal(rng);
    }
  }
  return trace;
}

void write_trace_csv(const SensorTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::kIo, "cannot open " + path.string() + " for writing");
  out << "channel,t_index,value\n";
  out.precision(17);
  for (Eigen::Index c = 0; c < trace.channels(); ++c) {
    for (Eigen::Index k = 0; k < trace.samples(); ++k) {
      out << c << ',' << k << ',' << trace.values(c, k) << '\n';
    }
  }
  if (!out) throw Error(ErrorCategory::kIo, "write failed for " + path.string());
}

SensorTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("channel,t_index,value", 0) != 0) {
    throw Error(ErrorCategory::kIo, path.string() + ": expected header channel,t_index,value");
  }
  struct Row {
    long channel;
    long index;
    double value;
  };
  std::vector<Row> rows;
  long max_channel = -1;
  long max_index = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Row r{};
    char c1 = 0;
    char c2 = 0;
    if (!(ss >> r.channel >> c1 >> r.index >> c2 >> r.value) || c1 != ',' || c2 != ',' ||
        r.channel < 0 || r.index < 0) {
      throw Error(ErrorCategory::kIo,
                  path.string() + ":" + std::to_string(line_no) + ": malformed trace row");
    }
    max_channel = std::max(max_channel, r.channel);
    max_index = std::max(max_index, r.index);
    rows.push_back(r);
  }
  if (rows.empty()) throw Error(ErrorCategory::kIo, path.string() + ": no samples");
  const auto m = static_cast<Eigen::Index>(max_channel + 1);
  const auto n = static_cast<Eigen::Index>(max_index + 1);
  if (static_cast<Eigen::Index>(rows.size()) != m * n) {
    throw Error(ErrorCategory::kIo,
                path.string() + ": channels do not share the same sample count");
  }
  SensorTrace trace;
  trace.values.setConstant(m, n, std::numeric_limits<double>::quiet_NaN());
  for (const Row& r : rows) trace.values(r.channel, r.index) = r.value;
  if (trace.values.hasNaN()) {
    throw Error(ErrorCategory::kIo, path.string() + ": duplicate or missing samples");
  }
  return trace;
}

}  // namespace tempo
