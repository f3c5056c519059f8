#pragma once

#include "unlearn_lab/influence.hpp"
#include "unlearn_lab/metrics.hpp"
#include "unlearn_lab/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace unlearn_lab {

enum class Method { imu, ga, rl, npo, simnpo, newton, retrain };

std::string to_string(Method method);
// Throws ParameterError listing the valid names.
Method method_from_string(const std::string& name);
const std::vector<std::string>& method_names();

struct UnlearnConfig {
  Method method = Method::imu;
  double learning_rate = 0.1;
  int epochs = 10;
  // 0: influence computed at the first epoch only; k: every k epochs.
  int update_frequency = 0;
  double top_ratio = 1.0;
  double beta = 1.0;
  double l1_strength = 0.0;
  double percentile = 95.0;
  Damping damping;
  std::uint64_t rng_seed = 0;
  // 0 = full batch. Otherwise epochs sweep shuffled mini-batches with the
  // per-sample weights frozen for the epoch.
  int batch_size = 0;
  // Replace influence weights by 1/m over the whole forget set (testing aid).
  bool force_uniform_weights = false;
  // Stop once the epoch evaluator reports acc_forget <= target. Negative
  // disables; has no effect without an evaluator.
  double target_forget_accuracy = -1.0;

  void validate() const;
};

struct UnlearnRun {
  Method method = Method::imu;
  ClassifierState initial;
  ClassifierState final_state;
  std::vector<EvalReport> per_epoch;
  std::vector<Vector> per_epoch_weights;
  std::vector<InfluenceReport> influence_updates;
  std::vector<std::string> warnings;
  bool diverged = false;
  double wall_clock_seconds = 0.0;
};

// Called after every epoch; an empty evaluator records default reports.
using EpochEvaluator = std::function<EvalReport(const ClassifierState&)>;

// True when influence values are recomputed at 0-based epoch t.
bool influence_update_due(int epoch, int update_frequency);

/// Influence-guided unlearning: at scheduled epochs recompute the forget-set
/// Hessian, influence values, negative selection, top-r filter and weights,
/// then step theta <- theta + eta * sum_i w_i grad l_i - eta * alpha * sign(theta).
/// The extractor is never touched. An empty negative selection falls back to
/// uniform weights over the forget set for that update and logs a warning.
UnlearnRun run_imu(const ClassifierState& model, const LabeledFeatures& forget,
                   const UnlearnConfig& cfg, const EpochEvaluator& eval = {});

// Gradient ascent on the mean forget loss. Halts on a non-finite loss.
UnlearnRun run_ga(const ClassifierState& model, const LabeledFeatures& forget,
                  const UnlearnConfig& cfg, const EpochEvaluator& eval = {});

// A uniformly random incorrect label per sample, fixed by cfg.rng_seed.
Labels random_incorrect_labels(const Labels& labels, int class_count,
                               std::uint64_t seed);

// Gradient descent on CE toward random incorrect labels.
UnlearnRun run_rl(const ClassifierState& model, const LabeledFeatures& forget,
                  const UnlearnConfig& cfg, const EpochEvaluator& eval = {});

// 2 pi^b / (pi^b + ref^b), evaluated as 2 sigmoid(b (log pi - log ref)).
double npo_weight(double pi, double pi_ref, double beta);
// 2 pi^b / (1 + pi^b).
double simnpo_weight(double pi, double beta);

// Label probabilities pi(y_i | z_i), floored at kProbabilityFloor.
Vector label_probabilities(const ClassifierState& cls,
                           const LabeledFeatures& data);

// (2/b) mean log(1 + (pi/ref)^b).
double npo_loss(const ClassifierState& cls, const LabeledFeatures& forget,
                const Vector& ref_probs, double beta);
// -mean W_i grad l_i.
Vector npo_gradient(const ClassifierState& cls, const LabeledFeatures& forget,
                    const Vector& ref_probs, double beta);
// Gradient of npo_loss by forward-mode differentiation of the loss itself.
Vector npo_gradient_autodiff(const ClassifierState& cls,
                             const LabeledFeatures& forget,
                             const Vector& ref_probs, double beta);

double simnpo_loss(const ClassifierState& cls, const LabeledFeatures& forget,
                   double beta);
Vector simnpo_gradient(const ClassifierState& cls, const LabeledFeatures& forget,
                       double beta);

// NPO against the initial model as reference.
UnlearnRun run_npo(const ClassifierState& model, const LabeledFeatures& forget,
                   const UnlearnConfig& cfg, const EpochEvaluator& eval = {});

UnlearnRun run_simnpo(const ClassifierState& model,
                      const LabeledFeatures& forget, const UnlearnConfig& cfg,
                      const EpochEvaluator& eval = {});

struct NewtonRemovalOptions {
  double l2 = 0.0;  // regularization of the trained objective
  Damping damping{1e-3, true};
  int n_retained = 0;
  // Rows used to estimate the Hessian; empty means the forget set itself
  // (retain-free mode).
  std::optional<Matrix> hessian_features;
};

// (1/n_retained) H^{-1} grad_sum.
Vector newton_delta(const HessianFactor& hessian, const Vector& grad_sum,
                    int n_retained);

/// One-step Newton removal: theta + (1/n_retained) H^{-1} sum_f grad(l_i +
/// (l2/2)||theta||^2), with H the damped mean CE Hessian of the chosen rows
/// plus l2 I. An empty forget set returns the model unchanged.
ClassifierState newton_removal(const ClassifierState& model,
                               const LabeledFeatures& forget,
                               const NewtonRemovalOptions& options);

// Trains from scratch on the retain set only.
ClassifierState retrain_oracle(const LabeledFeatures& retain, int class_count,
                               const TrainConfig& cfg);

// Everything a method dispatcher needs; retain is required only by retrain
// and by newton when its Hessian uses retained data.
struct UnlearnProblem {
  ClassifierState original;
  LabeledFeatures forget;
  std::optional<LabeledFeatures> retain;
  TrainConfig train;
  int class_count = 0;
  // Size of the original training set; used by newton when retain is absent.
  int train_size = 0;
};

UnlearnRun run_unlearning(const UnlearnProblem& problem,
                          const UnlearnConfig& cfg,
                          const EpochEvaluator& eval = {});

}  // namespace unlearn_lab
