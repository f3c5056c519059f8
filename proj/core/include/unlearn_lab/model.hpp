#pragma once

#include "unlearn_lab/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace unlearn_lab {

enum class ExtractorKind { identity, random_relu };

std::string to_string(ExtractorKind kind);
ExtractorKind extractor_kind_from_string(const std::string& name);

/// Frozen feature map z = phi(x).
///
/// `identity` passes inputs through; `random_relu` computes max(0, P x) with a
/// projection P drawn from N(0, 1/d_in) using `seed`. Nothing mutates an
/// extractor after construction.
class FeatureExtractor {
 public:
  static FeatureExtractor identity(int dim);
  static FeatureExtractor random_relu(int input_dim, int feature_dim,
                                      std::uint64_t seed);
  // random_relu with an explicit projection (d_feat x d_in); seed is kept
  // for bookkeeping only.
  static FeatureExtractor with_projection(Matrix projection,
                                          std::uint64_t seed = 0);

  ExtractorKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int feature_dim() const { return feature_dim_; }
  std::uint64_t seed() const { return seed_; }
  const Matrix& projection() const { return projection_; }

  Vector extract(const Vector& x) const;
  // Row-wise extraction of an n x d_in matrix.
  Matrix extract_all(const Matrix& inputs) const;

 private:
  FeatureExtractor(ExtractorKind kind, int input_dim, int feature_dim,
                   std::uint64_t seed, Matrix projection);

  ExtractorKind kind_;
  int input_dim_;
  int feature_dim_;
  std::uint64_t seed_;
  Matrix projection_;
};

/// Softmax head: logits = W z + b.
///
/// The flattened parameter vector is class-major, [w_0, b_0, w_1, b_1, ...],
/// i.e. the bias is the coefficient of a constant feature 1 appended to z.
/// This is the ordering of (p - onehot(y)) ⊗ [z; 1].
struct ClassifierState {
  Matrix weights;  // C x d_feat
  Vector bias;     // C

  static ClassifierState zeros(int class_count, int feature_dim);

  int class_count() const { return static_cast<int>(weights.rows()); }
  int feature_dim() const { return static_cast<int>(weights.cols()); }
  int param_count() const { return class_count() * (feature_dim() + 1); }

  Vector flatten() const;
  static ClassifierState unflatten(const Vector& params, int class_count,
                                   int feature_dim);
  bool all_finite() const;
};

Vector logits(const ClassifierState& cls, const Vector& z);

// Max-subtracted softmax. Throws NumericError on non-finite input.
Vector softmax(const Vector& logits);

Vector forward_probs(const ClassifierState& cls, const Vector& z);

// -log p_y, computed as logsumexp(logits) - logits[y].
double ce_loss(const ClassifierState& cls, const Vector& z, int label);

// Gradient of ce_loss w.r.t. the flattened parameters.
Vector grad_classifier(const ClassifierState& cls, const Vector& z, int label);

/// Mean cross-entropy Hessian over the rows of `features` plus damping * I.
///
/// H = (1/m) sum_i (diag(p_i) - p_i p_i^T) ⊗ ([z_i;1][z_i;1]^T) + damping I.
/// The CE Hessian does not depend on the labels.
Matrix hessian_classifier(const ClassifierState& cls, const Matrix& features,
                          double damping);

// Diagonal of the empirical Fisher (1/m) sum_i g_i g_i^T.
Vector fisher_diag(const ClassifierState& cls, const LabeledFeatures& data);

double mean_loss(const ClassifierState& cls, const LabeledFeatures& data);
Vector mean_gradient(const ClassifierState& cls, const LabeledFeatures& data);
Vector per_sample_losses(const ClassifierState& cls, const Matrix& features,
                         const Labels& labels);

// Argmax with ties resolved to the lowest class index.
int predict(const ClassifierState& cls, const Vector& z);

enum class Solver { gradient_descent, newton };

std::string to_string(Solver solver);
Solver solver_from_string(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.5;
  int max_epochs = 20000;
  double tol = 1e-6;  // stop once ||grad|| <= tol
  double l2 = 1e-3;   // objective: mean CE + (l2/2) ||theta||^2
  Solver solver = Solver::gradient_descent;
  // 0 starts from zeros; otherwise parameters start at N(0, 0.01) draws.
  std::uint64_t init_seed = 0;

  void validate() const;
};

struct TrainResult {
  ClassifierState state;
  int epochs = 0;
  double grad_norm = 0.0;
  double objective = 0.0;
  bool converged = false;
};

double regularized_objective(const ClassifierState& cls,
                             const LabeledFeatures& data, double l2);
Vector regularized_gradient(const ClassifierState& cls,
                            const LabeledFeatures& data, double l2);

/// Full-batch minimization of mean CE + (l2/2)||theta||^2.
///
/// Stops when the gradient norm drops to cfg.tol or after cfg.max_epochs
/// iterations. The Newton solver uses a backtracking line search and requires
/// l2 > 0. Throws TrainingError if the objective becomes non-finite.
TrainResult train_classifier(const LabeledFeatures& data, int class_count,
                             const TrainConfig& cfg,
                             const std::optional<ClassifierState>& warm_start =
                                 std::nullopt);

}  // namespace unlearn_lab
