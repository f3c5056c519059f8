#include "unlearn_lab/unlearn.hpp"

#include "unlearn_lab/dual.hpp"
#include "unlearn_lab/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace unlearn_lab {

std::string to_string(Method method) {
  switch (method) {
    case Method::imu: return "imu";
    case Method::ga: return "ga";
    case Method::rl: return "rl";
    case Method::npo: return "npo";
    case Method::simnpo: return "simnpo";
    case Method::newton: return "newton";
    case Method::retrain: return "retrain";
  }
  return "imu";
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"imu", "ga", "rl", "npo",
                                                 "simnpo", "newton", "retrain"};
  return names;
}

Method method_from_string(const std::string& name) {
  for (Method m : {Method::imu, Method::ga, Method::rl, Method::npo,
                   Method::simnpo, Method::newton, Method::retrain}) {
    if (to_string(m) == name) return m;
  }
  std::string valid;
  for (const auto& n : method_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ParameterError("unknown method '" + name + "' (valid: " + valid + ")");
}

void UnlearnConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ParameterError("unlearn: learning_rate must be >= 0");
  if (epochs < 1) throw ParameterError("unlearn: epochs must be >= 1");
  if (update_frequency < 0) throw ParameterError("unlearn: update_frequency must be >= 0");
  if (!(top_ratio > 0.0 && top_ratio <= 1.0)) {
    throw ParameterError("unlearn: top_ratio must be in (0, 1]");
  }
  if ((method == Method::npo || method == Method::simnpo) && !(beta > 0.0)) {
    throw ParameterError("unlearn: beta must be > 0");
  }
  if (!(l1_strength >= 0.0)) throw ParameterError("unlearn: l1_strength must be >= 0");
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw ParameterError("unlearn: percentile must be in (0, 100]");
  }
  if (batch_size < 0) throw ParameterError("unlearn: batch_size must be >= 0");
  if (target_forget_accuracy > 1.0) {
    throw ParameterError("unlearn: target_forget_accuracy must be <= 1");
  }
}

bool influence_update_due(int epoch, int update_frequency) {
  if (update_frequency == 0) return epoch == 0;
  return epoch % update_frequency == 0;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// sum_{i in rows} coeff_i * grad l(z_i, y_i)
Vector weighted_gradient(const ClassifierState& cls, const Matrix& features,
                         const Labels& labels, const Vector& coeffs,
                         const std::vector<int>& rows) {
  Vector g = Vector::Zero(cls.param_count());
  for (int i : rows) {
    const double c = coeffs(i);
    if (c == 0.0) continue;
    g += c * grad_classifier(cls, features.row(i).transpose(),
                             labels[static_cast<std::size_t>(i)]);
  }
  return g;
}

std::vector<std::vector<int>> epoch_batches(int m, int batch_size,
                                            std::uint64_t seed, int epoch) {
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  if (batch_size <= 0 || batch_size >= m) return {order};
  std::mt19937_64 rng(seed + static_cast<std::uint64_t>(epoch) * 0x9e3779b97f4a7c15ULL);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> batches;
  for (int s = 0; s < m; s += batch_size) {
    batches.emplace_back(order.begin() + s, order.begin() + std::min(m, s + batch_size));
  }
  return batches;
}

Vector sign_of(const Vector& v) {
  return v.unaryExpr([](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); });
}

bool finite_loss(const ClassifierState& cls, const LabeledFeatures& data) {
  if (!cls.all_finite()) return false;
  try {
    return std::isfinite(mean_loss(cls, data));
  } catch (const NumericError&) {
    return false;
  }
}

// Per-sample coefficients c_i of the update theta += eta * sum_i c_i g_i,
// evaluated at the current parameters.
using CoeffFn = std::function<Vector(const ClassifierState&, int epoch)>;

struct LoopOptions {
  const LabeledFeatures* data = nullptr;  // rows whose gradients drive the step
  CoeffFn coeffs;
  double l1 = 0.0;
  // Coefficients are computed once per epoch rather than per batch.
  bool freeze_per_epoch = false;
};

void run_loop(Method method, const ClassifierState& model,
              const LabeledFeatures& forget, const UnlearnConfig& cfg,
              const EpochEvaluator& eval, const LoopOptions& loop,
              UnlearnRun& run) {
  cfg.validate();
  if (forget.empty()) throw ParameterError("unlearn: forget set is empty");
  run.method = method;
  run.initial = model;
  ClassifierState state = model;
  const int c = model.class_count();
  const int d = model.feature_dim();
  const LabeledFeatures& data = *loop.data;
  const int m = data.size();
  double elapsed = 0.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = Clock::now();
    Vector frozen;
    if (loop.freeze_per_epoch) frozen = loop.coeffs(state, epoch);
    for (const auto& batch : epoch_batches(m, cfg.batch_size, cfg.rng_seed, epoch)) {
      const Vector coeffs = loop.freeze_per_epoch ? frozen : loop.coeffs(state, epoch);
      // Scale a batch so its expected direction matches the full-batch one.
      const double scale = static_cast<double>(m) / static_cast<double>(batch.size());
      Vector direction = scale * weighted_gradient(state, data.features, data.labels,
                                                   coeffs, batch);
      Vector params = state.flatten();
      params += cfg.learning_rate * direction;
      if (loop.l1 > 0.0) params -= cfg.learning_rate * loop.l1 * sign_of(params);
      state = ClassifierState::unflatten(params, c, d);
      if (!finite_loss(state, forget)) break;
    }
    elapsed += seconds_since(start);

    if (!finite_loss(state, forget)) {
      run.diverged = true;
      run.warnings.push_back("non-finite forget loss at epoch " +
                             std::to_string(epoch + 1) + "; run halted");
      break;
    }
    run.per_epoch.push_back(eval ? eval(state) : EvalReport{});
    run.per_epoch.back().runtime_seconds = elapsed;
    if (eval && cfg.target_forget_accuracy >= 0.0 &&
        run.per_epoch.back().acc_forget <= cfg.target_forget_accuracy) {
      break;
    }
  }
  run.final_state = std::move(state);
  run.wall_clock_seconds = elapsed;
}

Vector uniform(int m) {
  return Vector::Constant(m, 1.0 / static_cast<double>(m));
}

}  // namespace

UnlearnRun run_imu(const ClassifierState& model, const LabeledFeatures& forget,
                   const UnlearnConfig& cfg, const EpochEvaluator& eval) {
  if (cfg.method != Method::imu) throw ParameterError("run_imu: method must be imu");
  UnlearnRun run;
  Vector weights;
  const InfluenceOptions options{cfg.damping, cfg.percentile, cfg.top_ratio};

  LoopOptions loop;
  loop.data = &forget;
  loop.l1 = cfg.l1_strength;
  loop.freeze_per_epoch = true;
  loop.coeffs = [&](const ClassifierState& state, int epoch) -> Vector {
    if (cfg.force_uniform_weights) {
      weights = uniform(forget.size());
    } else if (influence_update_due(epoch, cfg.update_frequency) || weights.size() == 0) {
      InfluenceReport report = compute_influence_report(state, forget, options);
      if (report.empty_selection) {
        run.warnings.push_back("epoch " + std::to_string(epoch + 1) +
                               ": no sample has negative influence; using uniform "
                               "weights over the forget set");
        weights = uniform(forget.size());
      } else {
        weights = report.weights;
      }
      run.influence_updates.push_back(std::move(report));
    }
    run.per_epoch_weights.push_back(weights);
    return weights;
  };
  run_loop(Method::imu, model, forget, cfg, eval, loop, run);
  return run;
}

UnlearnRun run_ga(const ClassifierState& model, const LabeledFeatures& forget,
                  const UnlearnConfig& cfg, const EpochEvaluator& eval) {
  LoopOptions loop;
  loop.data = &forget;
  loop.freeze_per_epoch = true;
  const Vector w = uniform(std::max(forget.size(), 1));
  loop.coeffs = [&](const ClassifierState&, int) { return w; };
  UnlearnRun run;
  run_loop(Method::ga, model, forget, cfg, eval, loop, run);
  return run;
}

Labels random_incorrect_labels(const Labels& labels, int class_count,
                               std::uint64_t seed) {
  if (class_count < 2) throw ParameterError("random labels need at least 2 classes");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shift(1, class_count - 1);
  Labels out;
  out.reserve(labels.size());
  for (int y : labels) out.push_back((y + shift(rng)) % class_count);
  return out;
}

UnlearnRun run_rl(const ClassifierState& model, const LabeledFeatures& forget,
                  const UnlearnConfig& cfg, const EpochEvaluator& eval) {
  LabeledFeatures relabeled{forget.features,
                            random_incorrect_labels(forget.labels, model.class_count(),
                                                    cfg.rng_seed)};
  LoopOptions loop;
  loop.data = &relabeled;
  loop.freeze_per_epoch = true;
  // Descent on the relabeled CE is ascent with negative coefficients.
  const Vector w = -uniform(std::max(forget.size(), 1));
  loop.coeffs = [&](const ClassifierState&, int) { return w; };
  UnlearnRun run;
  run_loop(Method::rl, model, forget, cfg, eval, loop, run);
  return run;
}

double npo_weight(double pi, double pi_ref, double beta) {
  const double x = beta * (std::log(std::max(pi, kProbabilityFloor)) -
                           std::log(std::max(pi_ref, kProbabilityFloor)));
  return 2.0 / (1.0 + std::exp(-x));
}

double simnpo_weight(double pi, double beta) {
  const double x = beta * std::log(std::max(pi, kProbabilityFloor));
  return 2.0 / (1.0 + std::exp(-x));
}

Vector label_probabilities(const ClassifierState& cls, const LabeledFeatures& data) {
  Vector p(data.size());
  for (int i = 0; i < data.size(); ++i) {
    const Vector probs = forward_probs(cls, data.features.row(i).transpose());
    p(i) = std::max(probs(data.labels[static_cast<std::size_t>(i)]), kProbabilityFloor);
  }
  return p;
}

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void check_ref(const LabeledFeatures& forget, const Vector& ref_probs) {
  if (ref_probs.size() != forget.size()) {
    throw ParameterError("npo: one reference probability per forget sample is required");
  }
}

// (2/b) mean log(1 + (pi/ref)^b) over generic scalars, from the logits up.
template <class T>
T npo_loss_generic(const std::vector<T>& params, int c, int d,
                   const LabeledFeatures& forget, const Vector& ref_probs,
                   double beta) {
  T total(0.0);
  std::vector<T> l(static_cast<std::size_t>(c));
  for (int i = 0; i < forget.size(); ++i) {
    for (int k = 0; k < c; ++k) {
      T acc = params[static_cast<std::size_t>(k * (d + 1) + d)];
      for (int j = 0; j < d; ++j) {
        acc += params[static_cast<std::size_t>(k * (d + 1) + j)] * T(forget.features(i, j));
      }
      l[static_cast<std::size_t>(k)] = acc;
    }
    T top = *std::max_element(l.begin(), l.end());
    T sum(0.0);
    for (const T& v : l) sum += exp(v - top);
    const T log_pi = l[static_cast<std::size_t>(forget.labels[static_cast<std::size_t>(i)])] -
                     top - log(sum);
    const T x = T(beta) * (log_pi - T(std::log(std::max(ref_probs(i), kProbabilityFloor))));
    total += log(T(1.0) + exp(x));
  }
  return T(2.0 / beta) * total / T(static_cast<double>(forget.size()));
}

}  // namespace

double npo_loss(const ClassifierState& cls, const LabeledFeatures& forget,
                const Vector& ref_probs, double beta) {
  check_ref(forget, ref_probs);
  const Vector pi = label_probabilities(cls, forget);
  double total = 0.0;
  for (int i = 0; i < forget.size(); ++i) {
    total += softplus(beta * (std::log(pi(i)) -
                              std::log(std::max(ref_probs(i), kProbabilityFloor))));
  }
  return 2.0 / beta * total / static_cast<double>(forget.size());
}

Vector npo_gradient(const ClassifierState& cls, const LabeledFeatures& forget,
                    const Vector& ref_probs, double beta) {
  check_ref(forget, ref_probs);
  const Vector pi = label_probabilities(cls, forget);
  Vector g = Vector::Zero(cls.param_count());
  for (int i = 0; i < forget.size(); ++i) {
    g -= npo_weight(pi(i), ref_probs(i), beta) *
         grad_classifier(cls, forget.features.row(i).transpose(),
                         forget.labels[static_cast<std::size_t>(i)]);
  }
  return g / static_cast<double>(forget.size());
}

Vector npo_gradient_autodiff(const ClassifierState& cls,
                             const LabeledFeatures& forget,
                             const Vector& ref_probs, double beta) {
  check_ref(forget, ref_probs);
  const Vector flat = cls.flatten();
  const int p = cls.param_count();
  std::vector<Dual> params(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) params[static_cast<std::size_t>(j)] = Dual(flat(j));
  Vector g(p);
  for (int j = 0; j < p; ++j) {
    params[static_cast<std::size_t>(j)].d = 1.0;
    g(j) = npo_loss_generic(params, cls.class_count(), cls.feature_dim(), forget,
                            ref_probs, beta)
               .d;
    params[static_cast<std::size_t>(j)].d = 0.0;
  }
  return g;
}

double simnpo_loss(const ClassifierState& cls, const LabeledFeatures& forget,
                   double beta) {
  const Vector pi = label_probabilities(cls, forget);
  double total = 0.0;
  for (int i = 0; i < forget.size(); ++i) total += softplus(beta * std::log(pi(i)));
  return 2.0 / beta * total / static_cast<double>(forget.size());
}

Vector simnpo_gradient(const ClassifierState& cls, const LabeledFeatures& forget,
                       double beta) {
  const Vector pi = label_probabilities(cls, forget);
  Vector g = Vector::Zero(cls.param_count());
  for (int i = 0; i < forget.size(); ++i) {
    g -= simnpo_weight(pi(i), beta) *
         grad_classifier(cls, forget.features.row(i).transpose(),
                         forget.labels[static_cast<std::size_t>(i)]);
  }
  return g / static_cast<double>(forget.size());
}

UnlearnRun run_npo(const ClassifierState& model, const LabeledFeatures& forget,
                   const UnlearnConfig& cfg, const EpochEvaluator& eval) {
  cfg.validate();
  const Vector ref = label_probabilities(model, forget);
  LoopOptions loop;
  loop.data = &forget;
  const double m = static_cast<double>(std::max(forget.size(), 1));
  loop.coeffs = [&](const ClassifierState& state, int) {
    const Vector pi = label_probabilities(state, forget);
    Vector w(forget.size());
    for (int i = 0; i < forget.size(); ++i) w(i) = npo_weight(pi(i), ref(i), cfg.beta) / m;
    return w;
  };
  UnlearnRun run;
  run_loop(Method::npo, model, forget, cfg, eval, loop, run);
  return run;
}

UnlearnRun run_simnpo(const ClassifierState& model, const LabeledFeatures& forget,
                      const UnlearnConfig& cfg, const EpochEvaluator& eval) {
  cfg.validate();
  LoopOptions loop;
  loop.data = &forget;
  const double m = static_cast<double>(std::max(forget.size(), 1));
  loop.coeffs = [&](const ClassifierState& state, int) {
    const Vector pi = label_probabilities(state, forget);
    Vector w(forget.size());
    for (int i = 0; i < forget.size(); ++i) w(i) = simnpo_weight(pi(i), cfg.beta) / m;
    return w;
  };
  UnlearnRun run;
  run_loop(Method::simnpo, model, forget, cfg, eval, loop, run);
  return run;
}

Vector newton_delta(const HessianFactor& hessian, const Vector& grad_sum,
                    int n_retained) {
  if (n_retained < 1) throw ParameterError("newton: n_retained must be >= 1");
  return hessian.solve(grad_sum) / static_cast<double>(n_retained);
}

ClassifierState newton_removal(const ClassifierState& model,
                               const LabeledFeatures& forget,
                               const NewtonRemovalOptions& options) {
  if (forget.empty()) return model;
  if (!(options.damping.value > 0.0) && !(options.l2 > 0.0)) {
    throw ParameterError("newton: damping or l2 must be > 0");
  }
  const Matrix& rows = options.hessian_features ? *options.hessian_features : forget.features;
  Matrix h = hessian_classifier(model, rows, 0.0);
  const double lambda = options.damping.resolve(h);
  h.diagonal().array() += lambda + options.l2;
  const HessianFactor factor(std::move(h), lambda);

  const Vector theta = model.flatten();
  Vector grad_sum = Vector::Zero(model.param_count());
  for (int i = 0; i < forget.size(); ++i) {
    grad_sum += grad_classifier(model, forget.features.row(i).transpose(),
                                forget.labels[static_cast<std::size_t>(i)]) +
                options.l2 * theta;
  }
  return ClassifierState::unflatten(theta + newton_delta(factor, grad_sum, options.n_retained),
                                    model.class_count(), model.feature_dim());
}

ClassifierState retrain_oracle(const LabeledFeatures& retain, int class_count,
                               const TrainConfig& cfg) {
  return train_classifier(retain, class_count, cfg).state;
}

UnlearnRun run_unlearning(const UnlearnProblem& problem, const UnlearnConfig& cfg,
                          const EpochEvaluator& eval) {
  cfg.validate();
  switch (cfg.method) {
    case Method::imu: return run_imu(problem.original, problem.forget, cfg, eval);
    case Method::ga: return run_ga(problem.original, problem.forget, cfg, eval);
    case Method::rl: return run_rl(problem.original, problem.forget, cfg, eval);
    case Method::npo: return run_npo(problem.original, problem.forget, cfg, eval);
    case Method::simnpo: return run_simnpo(problem.original, problem.forget, cfg, eval);
    case Method::newton:
    case Method::retrain: break;
  }

  UnlearnRun run;
  run.method = cfg.method;
  run.initial = problem.original;
  const auto start = Clock::now();
  if (cfg.method == Method::newton) {
    NewtonRemovalOptions options;
    options.l2 = problem.train.l2;
    options.damping = cfg.damping;
    if (problem.retain) {
      options.n_retained = problem.retain->size();
      options.hessian_features = problem.retain->features;
    } else {
      options.n_retained = problem.train_size - problem.forget.size();
      run.warnings.push_back("newton: Hessian estimated on the forget set only");
    }
    run.final_state = newton_removal(problem.original, problem.forget, options);
  } else {
    if (!problem.retain) throw ParameterError("retrain: the retain set is required");
    run.final_state = retrain_oracle(*problem.retain, problem.class_count, problem.train);
  }
  run.wall_clock_seconds = seconds_since(start);
  run.per_epoch.push_back(eval ? eval(run.final_state) : EvalReport{});
  run.per_epoch.back().runtime_seconds = run.wall_clock_seconds;
  return run;
}

}  // namespace unlearn_lab
