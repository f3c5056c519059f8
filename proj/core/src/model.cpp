#include "unlearn_lab/model.hpp"

#include "unlearn_lab/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace unlearn_lab {

std::string to_string(ExtractorKind kind) {
  return kind == ExtractorKind::identity ? "identity" : "random_relu";
}

ExtractorKind extractor_kind_from_string(const std::string& name) {
  if (name == "identity") return ExtractorKind::identity;
  if (name == "random_relu") return ExtractorKind::random_relu;
  throw ParameterError("unknown extractor kind '" + name +
                       "' (expected identity or random_relu)");
}

FeatureExtractor::FeatureExtractor(ExtractorKind kind, int input_dim,
                                   int feature_dim, std::uint64_t seed,
                                   Matrix projection)
    : kind_(kind),
      input_dim_(input_dim),
      feature_dim_(feature_dim),
      seed_(seed),
      projection_(std::move(projection)) {}

FeatureExtractor FeatureExtractor::identity(int dim) {
  if (dim < 1) throw ParameterError("identity extractor: dim must be >= 1");
  return FeatureExtractor(ExtractorKind::identity, dim, dim, 0, Matrix());
}

FeatureExtractor FeatureExtractor::random_relu(int input_dim, int feature_dim,
                                               std::uint64_t seed) {
  if (input_dim < 1 || feature_dim < 1) {
    throw ParameterError("random_relu extractor: dims must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(input_dim));
  Matrix p(feature_dim, input_dim);
  for (int i = 0; i < feature_dim; ++i) {
    for (int j = 0; j < input_dim; ++j) p(i, j) = normal(rng);
  }
  return FeatureExtractor(ExtractorKind::random_relu, input_dim, feature_dim,
                          seed, std::move(p));
}

FeatureExtractor FeatureExtractor::with_projection(Matrix projection,
                                                   std::uint64_t seed) {
  if (projection.size() == 0) {
    throw ParameterError("random_relu extractor: empty projection");
  }
  const int d_feat = static_cast<int>(projection.rows());
  const int d_in = static_cast<int>(projection.cols());
  return FeatureExtractor(ExtractorKind::random_relu, d_in, d_feat, seed,
                          std::move(projection));
}

Vector FeatureExtractor::extract(const Vector& x) const {
  if (x.size() != input_dim_) {
    throw ParameterError("extract_features: expected input of dim " +
                         std::to_string(input_dim_) + ", got " +
                         std::to_string(x.size()));
  }
  if (kind_ == ExtractorKind::identity) return x;
  return (projection_ * x).cwiseMax(0.0);
}

Matrix FeatureExtractor::extract_all(const Matrix& inputs) const {
  if (inputs.cols() != input_dim_) {
    throw ParameterError("extract_features: expected inputs with " +
                         std::to_string(input_dim_) + " columns, got " +
                         std::to_string(inputs.cols()));
  }
  if (kind_ == ExtractorKind::identity) return inputs;
  return (inputs * projection_.transpose()).cwiseMax(0.0);
}

ClassifierState ClassifierState::zeros(int class_count, int feature_dim) {
  return {Matrix::Zero(class_count, feature_dim), Vector::Zero(class_count)};
}

Vector ClassifierState::flatten() const {
  const int c = class_count();
  const int d = feature_dim();
  Vector out(param_count());
  for (int k = 0; k < c; ++k) {
    out.segment(k * (d + 1), d) = weights.row(k).transpose();
    out(k * (d + 1) + d) = bias(k);
  }
  return out;
}

ClassifierState ClassifierState::unflatten(const Vector& params,
                                           int class_count, int feature_dim) {
  if (params.size() != class_count * (feature_dim + 1)) {
    throw ParameterError("unflatten: parameter vector has wrong length");
  }
  ClassifierState s = zeros(class_count, feature_dim);
  for (int k = 0; k < class_count; ++k) {
    s.weights.row(k) = params.segment(k * (feature_dim + 1), feature_dim).transpose();
    s.bias(k) = params(k * (feature_dim + 1) + feature_dim);
  }
  return s;
}

bool ClassifierState::all_finite() const {
  return weights.allFinite() && bias.allFinite();
}

namespace {

void check_dims(const ClassifierState& cls, const Vector& z) {
  if (z.size() != cls.feature_dim()) {
    throw ParameterError("classifier expects features of dim " +
                         std::to_string(cls.feature_dim()) + ", got " +
                         std::to_string(z.size()));
  }
}

void check_label(const ClassifierState& cls, int label) {
  if (label < 0 || label >= cls.class_count()) {
    throw ParameterError("label " + std::to_string(label) + " outside [0, " +
                         std::to_string(cls.class_count()) + ")");
  }
}

void check_data(const ClassifierState& cls, const LabeledFeatures& data) {
  if (data.features.rows() != data.size()) {
    throw ParameterError("feature rows do not match label count");
  }
  if (data.features.cols() != cls.feature_dim()) {
    throw ParameterError("classifier expects features of dim " +
                         std::to_string(cls.feature_dim()) + ", got " +
                         std::to_string(data.features.cols()));
  }
}

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

Vector logits(const ClassifierState& cls, const Vector& z) {
  check_dims(cls, z);
  return cls.weights * z + cls.bias;
}

Vector softmax(const Vector& l) {
  if (!l.allFinite()) throw NumericError("softmax: non-finite logits");
  Vector e = (l.array() - l.maxCoeff()).exp();
  return e / e.sum();
}

Vector forward_probs(const ClassifierState& cls, const Vector& z) {
  if (!z.allFinite()) throw NumericError("forward_probs: non-finite input");
  return softmax(logits(cls, z));
}

double ce_loss(const ClassifierState& cls, const Vector& z, int label) {
  check_label(cls, label);
  const Vector l = logits(cls, z);
  if (!l.allFinite()) throw NumericError("ce_loss: non-finite logits");
  return log_sum_exp(l) - l(label);
}

Vector grad_classifier(const ClassifierState& cls, const Vector& z, int label) {
  check_label(cls, label);
  Vector residual = forward_probs(cls, z);
  residual(label) -= 1.0;
  const int d = cls.feature_dim();
  Vector g(cls.param_count());
  for (int k = 0; k < cls.class_count(); ++k) {
    g.segment(k * (d + 1), d) = residual(k) * z;
    g(k * (d + 1) + d) = residual(k);
  }
  return g;
}

Matrix hessian_classifier(const ClassifierState& cls, const Matrix& features,
                          double damping) {
  if (features.rows() < 1) throw ParameterError("hessian_classifier: need m >= 1");
  if (!(damping >= 0.0)) throw ParameterError("hessian_classifier: damping must be >= 0");
  if (features.cols() != cls.feature_dim()) {
    throw ParameterError("hessian_classifier: feature dim mismatch");
  }
  const int c = cls.class_count();
  const int d1 = cls.feature_dim() + 1;
  const int p = cls.param_count();
  Matrix h = Matrix::Zero(p, p);
  Vector u(d1);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const Vector z = features.row(i).transpose();
    const Vector prob = forward_probs(cls, z);
    u.head(d1 - 1) = z;
    u(d1 - 1) = 1.0;
    const Matrix uu = u * u.transpose();
    for (int a = 0; a < c; ++a) {
      for (int b = a; b < c; ++b) {
        const double coeff = (a == b ? prob(a) : 0.0) - prob(a) * prob(b);
        h.block(a * d1, b * d1, d1, d1).noalias() += coeff * uu;
      }
    }
  }
  h /= static_cast<double>(features.rows());
  // Only the upper block triangle was accumulated.
  for (int a = 0; a < c; ++a) {
    for (int b = 0; b < a; ++b) {
      h.block(a * d1, b * d1, d1, d1) = h.block(b * d1, a * d1, d1, d1).transpose();
    }
  }
  h.diagonal().array() += damping;
  if (!h.allFinite()) throw NumericError("hessian_classifier: non-finite entries");
  return h;
}

Vector fisher_diag(const ClassifierState& cls, const LabeledFeatures& data) {
  check_data(cls, data);
  if (data.empty()) throw ParameterError("fisher_diag: need m >= 1");
  Vector diag = Vector::Zero(cls.param_count());
  for (int i = 0; i < data.size(); ++i) {
    const Vector g = grad_classifier(cls, data.features.row(i).transpose(),
                                     data.labels[static_cast<std::size_t>(i)]);
    diag.array() += g.array().square();
  }
  return diag / static_cast<double>(data.size());
}

double mean_loss(const ClassifierState& cls, const LabeledFeatures& data) {
  check_data(cls, data);
  if (data.empty()) throw ParameterError("mean_loss: empty data");
  double total = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    total += ce_loss(cls, data.features.row(i).transpose(),
                     data.labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(data.size());
}

Vector mean_gradient(const ClassifierState& cls, const LabeledFeatures& data) {
  check_data(cls, data);
  if (data.empty()) throw ParameterError("mean_gradient: empty data");
  Vector g = Vector::Zero(cls.param_count());
  for (int i = 0; i < data.size(); ++i) {
    g += grad_classifier(cls, data.features.row(i).transpose(),
                         data.labels[static_cast<std::size_t>(i)]);
  }
  return g / static_cast<double>(data.size());
}

Vector per_sample_losses(const ClassifierState& cls, const Matrix& features,
                         const Labels& labels) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ParameterError("per_sample_losses: rows do not match labels");
  }
  Vector out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out(i) = ce_loss(cls, features.row(i).transpose(),
                     labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

int predict(const ClassifierState& cls, const Vector& z) {
  const Vector l = logits(cls, z);
  int best = 0;
  for (int k = 1; k < l.size(); ++k) {
    if (l(k) > l(best)) best = k;
  }
  return best;
}

std::string to_string(Solver solver) {
  return solver == Solver::newton ? "newton" : "gradient_descent";
}

Solver solver_from_string(const std::string& name) {
  if (name == "gradient_descent" || name == "gd") return Solver::gradient_descent;
  if (name == "newton") return Solver::newton;
  throw ParameterError("unknown solver '" + name +
                       "' (expected gradient_descent or newton)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("train: learning_rate must be > 0");
  if (!(tol > 0.0)) throw ParameterError("train: tol must be > 0");
  if (!(l2 >= 0.0)) throw ParameterError("train: l2 must be >= 0");
  if (max_epochs < 0) throw ParameterError("train: max_epochs must be >= 0");
  if (solver == Solver::newton && !(l2 > 0.0)) {
    throw ParameterError("train: the newton solver requires l2 > 0");
  }
}

double regularized_objective(const ClassifierState& cls,
                             const LabeledFeatures& data, double l2) {
  const double reg = 0.5 * l2 * (cls.weights.squaredNorm() + cls.bias.squaredNorm());
  return mean_loss(cls, data) + reg;
}

Vector regularized_gradient(const ClassifierState& cls,
                            const LabeledFeatures& data, double l2) {
  return mean_gradient(cls, data) + l2 * cls.flatten();
}

namespace {

ClassifierState initial_state(int class_count, int feature_dim,
                              std::uint64_t seed) {
  ClassifierState s = ClassifierState::zeros(class_count, feature_dim);
  if (seed == 0) return s;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (Eigen::Index i = 0; i < s.weights.size(); ++i) s.weights.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < s.bias.size(); ++i) s.bias(i) = normal(rng);
  return s;
}

void require_finite(double objective, int epoch) {
  if (!std::isfinite(objective)) {
    throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                        " (objective is not finite); lower the learning rate");
  }
}

}  // namespace

TrainResult train_classifier(const LabeledFeatures& data, int class_count,
                             const TrainConfig& cfg,
                             const std::optional<ClassifierState>& warm_start) {
  cfg.validate();
  if (data.empty()) throw ParameterError("train_classifier: empty dataset");
  const int d = static_cast<int>(data.features.cols());
  for (int y : data.labels) {
    if (y < 0 || y >= class_count) {
      throw ParameterError("train_classifier: label outside [0, C)");
    }
  }

  TrainResult result;
  ClassifierState state = warm_start ? *warm_start : initial_state(class_count, d, cfg.init_seed);
  if (state.class_count() != class_count || state.feature_dim() != d) {
    throw ParameterError("train_classifier: warm start has wrong shape");
  }

  double objective = 0.0;
  Vector grad;
  int epoch = 0;
  auto evaluate = [&] {
    try {
      objective = regularized_objective(state, data, cfg.l2);
      grad = regularized_gradient(state, data, cfg.l2);
    } catch (const NumericError&) {
      objective = std::numeric_limits<double>::quiet_NaN();
    }
    require_finite(objective, epoch);
  };
  evaluate();

  const int c = class_count;
  while (true) {
    result.grad_norm = grad.norm();
    if (result.grad_norm <= cfg.tol) {
      result.converged = true;
      break;
    }
    if (epoch >= cfg.max_epochs) break;

    Vector params = state.flatten();
    if (cfg.solver == Solver::gradient_descent) {
      params -= cfg.learning_rate * grad;
      state = ClassifierState::unflatten(params, c, d);
    } else {
      Matrix h = hessian_classifier(state, data.features, cfg.l2);
      Eigen::LLT<Matrix> llt(h);
      if (llt.info() != Eigen::Success) {
        throw TrainingError("newton step: Hessian is not positive definite");
      }
      const Vector step = -llt.solve(grad);
      const double slope = grad.dot(step);
      double t = 1.0;
      ClassifierState trial = state;
      double trial_obj = objective;
      bool accepted = false;
      for (int k = 0; k < 60; ++k) {
        trial = ClassifierState::unflatten(params + t * step, c, d);
        try {
          trial_obj = regularized_objective(trial, data, cfg.l2);
        } catch (const NumericError&) {
          trial_obj = std::numeric_limits<double>::infinity();
        }
        if (trial_obj < objective + 1e-4 * t * slope) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      // Near the optimum the objective cannot resolve the decrease; accept the
      // full step while it still shrinks the gradient, otherwise stop.
      if (!accepted) {
        trial = ClassifierState::unflatten(params + step, c, d);
        if (!(regularized_gradient(trial, data, cfg.l2).norm() < result.grad_norm)) break;
      }
      state = std::move(trial);
    }
    ++epoch;
    evaluate();
  }

  result.state = std::move(state);
  result.epochs = epoch;
  result.objective = objective;
  return result;
}

}  // namespace unlearn_lab
