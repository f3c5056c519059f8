#include "unlearn_lab/divergence.hpp"

#include "unlearn_lab/error.hpp"
#include "unlearn_lab/influence.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace unlearn_lab::divergence {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double label_sign(int label) {
  if (label != 0 && label != 1) throw ParameterError("logistic label must be 0 or 1");
  return 2.0 * label - 1.0;
}

}  // namespace

double logistic_confidence(const Vector& theta, double bias, const Vector& x,
                           int label) {
  return sigmoid(label_sign(label) * (theta.dot(x) + bias));
}

Vector logistic_step(const Vector& theta, double bias, const Vector& x,
                     int label, double learning_rate, double weight) {
  if (theta.size() != x.size()) throw ParameterError("logistic_step: dimension mismatch");
  const double f = logistic_confidence(theta, bias, x, label);
  return theta + learning_rate * weight * label_sign(label) * (1.0 - f) * x;
}

double weighted_norm_direct(const Vector& theta_t, const Vector& theta0,
                            const Matrix& samples) {
  if (theta_t.size() != theta0.size() || samples.cols() != theta0.size()) {
    throw ParameterError("weighted_norm_direct: dimension mismatch");
  }
  return (samples * (theta_t - theta0)).squaredNorm();
}

Matrix gram_matrix(const Matrix& samples) {
  const Matrix xtx = samples.transpose() * samples;
  Matrix g = samples * xtx * samples.transpose();
  // Exact symmetry for the eigen-solver and the symmetry check.
  return 0.5 * (g + g.transpose());
}

double weighted_norm_quadratic(const Vector& a, const Matrix& gram,
                               const Vector& weights) {
  if (a.size() != weights.size() || gram.rows() != a.size() || gram.cols() != a.size()) {
    throw ParameterError("weighted_norm_quadratic: dimension mismatch");
  }
  const Vector da = weights.cwiseProduct(a);
  return da.dot(gram * da);
}

bool EigenBounds::holds(double rel_tol) const {
  const double scale = std::max({std::abs(lower), std::abs(value), std::abs(upper),
                                 std::numeric_limits<double>::min()});
  return lower - value <= rel_tol * scale && value - upper <= rel_tol * scale;
}

namespace {

void require_symmetric(const Matrix& gram) {
  if (gram.rows() != gram.cols()) throw ParameterError("G must be square");
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ParameterError("G must be symmetric");
  }
}

}  // namespace

EigenBounds eigen_bounds_check(const Vector& a, const Matrix& gram,
                               const Vector& weights) {
  require_symmetric(gram);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("eigen_bounds_check: eigensolver failed");
  const double sq = weights.cwiseProduct(a).squaredNorm();
  EigenBounds b;
  b.lower = solver.eigenvalues().minCoeff() * sq;
  b.upper = solver.eigenvalues().maxCoeff() * sq;
  b.value = weighted_norm_quadratic(a, gram, weights);
  return b;
}

std::string to_string(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::ga: return "ga";
    case WeightScheme::npo: return "npo";
    case WeightScheme::imu: return "imu";
  }
  return "ga";
}

WeightScheme weight_scheme_from_string(const std::string& name) {
  if (name == "ga") return WeightScheme::ga;
  if (name == "npo") return WeightScheme::npo;
  if (name == "imu") return WeightScheme::imu;
  throw ParameterError("unknown weight scheme '" + name + "' (expected ga, npo or imu)");
}

std::string to_string(ReplayMode mode) {
  return mode == ReplayMode::frozen ? "frozen" : "live";
}

ReplayMode replay_mode_from_string(const std::string& name) {
  if (name == "frozen") return ReplayMode::frozen;
  if (name == "live") return ReplayMode::live;
  throw ParameterError("unknown replay mode '" + name + "' (expected frozen or live)");
}

LogisticInstance make_logistic_instance(int n_forget, int dim, std::uint64_t seed) {
  if (n_forget < 1 || dim < 1) throw ParameterError("logistic instance: sizes must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  LogisticInstance inst;
  inst.seed = seed;
  inst.samples.resize(n_forget, dim);
  for (int i = 0; i < n_forget; ++i) {
    for (int j = 0; j < dim; ++j) inst.samples(i, j) = normal(rng) / std::sqrt(dim);
    inst.labels.push_back(coin(rng) ? 1 : 0);
  }
  inst.theta0.resize(dim);
  inst.theta_ref.resize(dim);
  for (int j = 0; j < dim; ++j) inst.theta0(j) = normal(rng);
  for (int j = 0; j < dim; ++j) inst.theta_ref(j) = inst.theta0(j) + 0.5 * normal(rng);
  inst.bias = 0.1 * normal(rng);
  return inst;
}

namespace {

// Normalized sqrt-influence weights of the logistic forget set at theta.
Vector logistic_influence_weights(const LogisticInstance& inst, const Vector& theta,
                                  double damping) {
  const int n = static_cast<int>(inst.samples.rows());
  const int d = static_cast<int>(inst.samples.cols());
  Matrix h = Matrix::Zero(d, d);
  Matrix grads(n, d);
  for (int i = 0; i < n; ++i) {
    const Vector x = inst.samples.row(i).transpose();
    const int y = inst.labels[static_cast<std::size_t>(i)];
    const double f = logistic_confidence(theta, inst.bias, x, y);
    h += f * (1.0 - f) * x * x.transpose();
    grads.row(i) = (-label_sign(y) * (1.0 - f) * x).transpose();
  }
  h /= static_cast<double>(n);
  h.diagonal().array() += damping;
  const HessianFactor factor(std::move(h), damping);
  const Vector s = factor.solve(grads.colwise().mean().transpose());
  const Vector raw = -(grads * s);
  auto w = normalize_weights(raw, select_negative(raw), 95.0);
  if (!w) return Vector::Constant(n, 1.0 / n);
  return *w;
}

}  // namespace

Vector scheme_weights(const LogisticInstance& inst, const Vector& theta,
                      WeightScheme scheme, double beta, double damping) {
  const int n = static_cast<int>(inst.samples.rows());
  switch (scheme) {
    case WeightScheme::ga: return Vector::Ones(n);
    case WeightScheme::npo: {
      Vector w(n);
      for (int i = 0; i < n; ++i) {
        const Vector x = inst.samples.row(i).transpose();
        const int y = inst.labels[static_cast<std::size_t>(i)];
        const double fb = std::pow(logistic_confidence(theta, inst.bias, x, y), beta);
        const double rb = std::pow(logistic_confidence(inst.theta_ref, inst.bias, x, y), beta);
        w(i) = 2.0 * fb / (fb + rb);
      }
      return w;
    }
    case WeightScheme::imu: return logistic_influence_weights(inst, theta, damping);
  }
  return Vector::Ones(n);
}

namespace {

class Replayer {
 public:
  Replayer(const LogisticInstance& inst, const ReplayOptions& options)
      : inst_(inst), options_(options), rng_(options.sample_seed) {
    const int n = static_cast<int>(inst.samples.rows());
    state_.theta0 = inst.theta0;
    state_.theta_t = inst.theta0;
    state_.counts.assign(static_cast<std::size_t>(n), 0);
    state_.gram = gram_matrix(inst.samples);
    state_.weights = scheme_weights(inst, inst.theta0, options.scheme, options.beta,
                                    options.damping);
    factor0_.resize(n);
    for (int i = 0; i < n; ++i) {
      const int y = inst.labels[static_cast<std::size_t>(i)];
      factor0_(i) = label_sign(y) *
                    (1.0 - logistic_confidence(inst.theta0, inst.bias,
                                               inst.samples.row(i).transpose(), y));
    }
    state_.a = Vector::Zero(n);
    pick_ = std::uniform_int_distribution<int>(0, n - 1);
  }

  void step() {
    const int i = pick_(rng_);
    const Vector x = inst_.samples.row(i).transpose();
    const int y = inst_.labels[static_cast<std::size_t>(i)];
    ++state_.counts[static_cast<std::size_t>(i)];
    if (options_.mode == ReplayMode::frozen) {
      state_.theta_t += options_.learning_rate * state_.weights(i) * factor0_(i) * x;
    } else {
      const Vector w = scheme_weights(inst_, state_.theta_t, options_.scheme, options_.beta,
                                      options_.damping);
      state_.theta_t = logistic_step(state_.theta_t, inst_.bias, x, y,
                                     options_.learning_rate, w(i));
    }
    ++state_.steps;
    state_.a(i) += options_.learning_rate * factor0_(i);
  }

  const ReplayState& state() const { return state_; }

 private:
  const LogisticInstance& inst_;
  ReplayOptions options_;
  std::mt19937_64 rng_;
  std::uniform_int_distribution<int> pick_;
  Vector factor0_;
  ReplayState state_;
};

}  // namespace

ReplayState replay(const LogisticInstance& inst, const ReplayOptions& options) {
  if (options.steps < 0) throw ParameterError("replay: steps must be >= 0");
  Replayer r(inst, options);
  for (int t = 0; t < options.steps; ++t) r.step();
  return r.state();
}

ReplayRecord summarize(const LogisticInstance& inst, const ReplayState& state,
                       WeightScheme scheme) {
  ReplayRecord rec;
  rec.seed = inst.seed;
  rec.scheme = scheme;
  rec.step = state.steps;
  rec.direct_norm = weighted_norm_direct(state.theta_t, state.theta0, inst.samples);
  const EigenBounds b = eigen_bounds_check(state.a, state.gram, state.weights);
  rec.quadratic_norm = b.value;
  rec.lower = b.lower;
  rec.upper = b.upper;
  return rec;
}

std::vector<ReplayRecord> replay_trace(const LogisticInstance& inst,
                                       const ReplayOptions& options) {
  Replayer r(inst, options);
  const Matrix& gram = r.state().gram;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  const double lo = solver.eigenvalues().minCoeff();
  const double hi = solver.eigenvalues().maxCoeff();

  std::vector<ReplayRecord> out;
  out.reserve(static_cast<std::size_t>(options.steps));
  for (int t = 0; t < options.steps; ++t) {
    r.step();
    const ReplayState& s = r.state();
    ReplayRecord rec;
    rec.seed = inst.seed;
    rec.scheme = options.scheme;
    rec.step = s.steps;
    rec.direct_norm = weighted_norm_direct(s.theta_t, s.theta0, inst.samples);
    rec.quadratic_norm = weighted_norm_quadratic(s.a, gram, s.weights);
    const double sq = s.weights.cwiseProduct(s.a).squaredNorm();
    rec.lower = lo * sq;
    rec.upper = hi * sq;
    out.push_back(rec);
  }
  return out;
}

}  // namespace unlearn_lab::divergence
