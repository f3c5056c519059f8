#pragma once

#include "unlearn_lab/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace unlearn_lab::divergence {

// Logistic model f(x) = sigmoid((2y - 1)(theta^T x + b)) with constant b.
double logistic_confidence(const Vector& theta, double bias, const Vector& x,
                           int label);

/// One weighted logistic ascent step:
/// theta + eta * w * x * (2y - 1) * (1 - f(x)).
Vector logistic_step(const Vector& theta, double bias, const Vector& x,
                     int label, double learning_rate, double weight);

// (theta_t - theta0)^T X^T X (theta_t - theta0).
double weighted_norm_direct(const Vector& theta_t, const Vector& theta0,
                            const Matrix& samples);

// G_ij = x_i^T X^T X x_j, i.e. X (X^T X) X^T.
Matrix gram_matrix(const Matrix& samples);

// (D a)^T G (D a) with D = diag(weights).
double weighted_norm_quadratic(const Vector& a, const Matrix& gram,
                               const Vector& weights);

struct EigenBounds {
  double lower = 0.0;
  double value = 0.0;
  double upper = 0.0;

  bool holds(double rel_tol = 1e-9) const;
};

/// lambda_min(G) ||D a||^2 <= (D a)^T G (D a) <= lambda_max(G) ||D a||^2.
/// Throws ParameterError if G is not symmetric.
EigenBounds eigen_bounds_check(const Vector& a, const Matrix& gram,
                               const Vector& weights);

enum class WeightScheme { ga, npo, imu };
enum class ReplayMode { frozen, live };

std::string to_string(WeightScheme scheme);
WeightScheme weight_scheme_from_string(const std::string& name);
std::string to_string(ReplayMode mode);
ReplayMode replay_mode_from_string(const std::string& name);

/// A logistic forget set with the start point of the replay and the
/// reference model used by NPO weights.
struct LogisticInstance {
  Matrix samples;  // n_f x d
  std::vector<int> labels;
  Vector theta0;
  Vector theta_ref;
  double bias = 0.0;
  std::uint64_t seed = 0;
};

// Gaussian samples, random labels, theta0 and a perturbed reference.
LogisticInstance make_logistic_instance(int n_forget, int dim,
                                        std::uint64_t seed);

// Per-sample weights of a scheme, evaluated at theta:
// 1 (GA), W_theta against theta_ref (NPO), normalized influence (IMU).
Vector scheme_weights(const LogisticInstance& inst, const Vector& theta,
                      WeightScheme scheme, double beta = 1.0,
                      double damping = 1e-3);

struct ReplayState {
  Vector theta0;
  Vector theta_t;
  std::vector<int> counts;  // gamma_i: how often sample i was replayed
  Vector a;                 // eta gamma_i (2y_i - 1)(1 - f_theta0(x_i))
  Vector weights;           // diagonal of D, evaluated at theta0
  Matrix gram;
  int steps = 0;
};

struct ReplayOptions {
  WeightScheme scheme = WeightScheme::ga;
  ReplayMode mode = ReplayMode::frozen;
  double learning_rate = 0.1;
  int steps = 50;
  double beta = 1.0;
  double damping = 1e-3;
  std::uint64_t sample_seed = 0;
};

/// Single-sample replay: each step draws one sample uniformly. In frozen mode
/// the confidence factor and weight of a sample stay at their theta0 values,
/// so the closed form holds exactly; in live mode they follow theta.
ReplayState replay(const LogisticInstance& inst, const ReplayOptions& options);

struct ReplayRecord {
  std::uint64_t seed = 0;
  WeightScheme scheme = WeightScheme::ga;
  int step = 0;
  double direct_norm = 0.0;
  double quadratic_norm = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Direct norm, quadratic form and eigen bounds of one finished replay.
ReplayRecord summarize(const LogisticInstance& inst, const ReplayState& state,
                       WeightScheme scheme);

// Rows of divergence.csv for one instance and scheme, one per step.
std::vector<ReplayRecord> replay_trace(const LogisticInstance& inst,
                                       const ReplayOptions& options);

}  // namespace unlearn_lab::divergence
