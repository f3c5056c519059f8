#pragma once

#include "unlearn_lab/model.hpp"
#include "unlearn_lab/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace unlearn_lab {

struct EvalReport {
  double acc_forget = 0.0;
  double acc_retain = 0.0;
  double acc_test = 0.0;
  double mia = 0.0;
  double w_dist = 0.0;
  std::optional<double> kl_retain;
  std::optional<double> kl_forget;
  double runtime_seconds = 0.0;
};

// Fraction of argmax-correct predictions. Throws ParameterError when empty.
double accuracy(const ClassifierState& cls, const LabeledFeatures& data);

struct MiaResult {
  double score = 0.0;      // fraction of forget samples judged non-members
  double threshold = 0.0;  // member iff loss <= threshold
  bool degenerate = false;
};

/// Loss-threshold membership attack.
///
/// The threshold is fitted on retain (members) vs test (non-members) losses
/// to maximize balanced accuracy over the observed loss values; ties go to
/// the largest threshold. Only the ordering of the losses matters. If every
/// loss is equal the score is 0.5 and `degenerate` is set.
MiaResult mia_from_losses(const std::vector<double>& forget,
                          const std::vector<double>& retain,
                          const std::vector<double>& test);

MiaResult mia_score(const ClassifierState& cls, const LabeledFeatures& forget,
                    const LabeledFeatures& retain, const LabeledFeatures& test);

// W1 between two distributions on unordered classes (0/1 ground metric),
// which is half their L1 distance.
double w1_discrete(const Vector& p, const Vector& q);

// Mean per-sample W1 between the two models' class distributions.
double w1_output_distance(const ClassifierState& a, const ClassifierState& b,
                          const Matrix& features);

inline constexpr double kProbabilityFloor = 1e-12;

struct KlResult {
  double value = 0.0;
  bool clamped = false;  // model put (near) zero mass on reference support
};

// KL(reference || model) in nats over the reference support.
KlResult kl_divergence(const Vector& reference, const Vector& model);

// Mean over context rows of KL(reference_i || model(context_i)).
KlResult kl_to_reference(const ClassifierState& cls, const Matrix& contexts,
                         const std::vector<Vector>& references);

/// Evaluates a classifier on fixed forget / retain / test features and,
/// when given, measures W_dist against a reference (retrained) model over
/// all three splits.
class SplitEvaluator {
 public:
  SplitEvaluator(LabeledFeatures forget, LabeledFeatures retain,
                 LabeledFeatures test,
                 std::optional<ClassifierState> reference = std::nullopt);

  EvalReport operator()(const ClassifierState& cls) const;

  const LabeledFeatures& forget() const { return forget_; }
  const LabeledFeatures& retain() const { return retain_; }
  const LabeledFeatures& test() const { return test_; }

 private:
  LabeledFeatures forget_;
  LabeledFeatures retain_;
  LabeledFeatures test_;
  std::optional<ClassifierState> reference_;
  Matrix all_features_;
};

// Fixed column order of runs.csv.
const std::vector<std::string>& eval_csv_columns();

}  // namespace unlearn_lab
