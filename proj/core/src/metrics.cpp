#include "unlearn_lab/metrics.hpp"

#include "unlearn_lab/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace unlearn_lab {

double accuracy(const ClassifierState& cls, const LabeledFeatures& data) {
  if (data.empty()) throw ParameterError("accuracy: empty subset");
  int correct = 0;
  for (int i = 0; i < data.size(); ++i) {
    if (predict(cls, data.features.row(i).transpose()) ==
        data.labels[static_cast<std::size_t>(i)]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

MiaResult mia_from_losses(const std::vector<double>& forget,
                          const std::vector<double>& retain,
                          const std::vector<double>& test) {
  if (forget.empty() || retain.empty() || test.empty()) {
    throw ParameterError("mia_score: forget, retain and test sets must be nonempty");
  }
  std::vector<double> candidates = retain;
  candidates.insert(candidates.end(), test.begin(), test.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  MiaResult result;
  if (candidates.size() == 1) {
    result.score = 0.5;
    result.threshold = candidates.front();
    result.degenerate = true;
    return result;
  }

  std::vector<double> r = retain;
  std::vector<double> t = test;
  std::sort(r.begin(), r.end());
  std::sort(t.begin(), t.end());
  const double nr = static_cast<double>(r.size());
  const double nt = static_cast<double>(t.size());

  double best = -1.0;
  double best_threshold = candidates.back();
  for (double tau : candidates) {
    const auto members = std::upper_bound(r.begin(), r.end(), tau) - r.begin();
    const auto test_members = std::upper_bound(t.begin(), t.end(), tau) - t.begin();
    const double tpr = static_cast<double>(members) / nr;
    const double tnr = 1.0 - static_cast<double>(test_members) / nt;
    const double balanced = 0.5 * (tpr + tnr);
    // Candidates ascend, so >= keeps the largest threshold among ties.
    if (balanced >= best) {
      best = balanced;
      best_threshold = tau;
    }
  }
  result.threshold = best_threshold;
  const auto non_members = std::count_if(forget.begin(), forget.end(),
                                         [&](double l) { return l > best_threshold; });
  result.score = static_cast<double>(non_members) / static_cast<double>(forget.size());
  return result;
}

namespace {

std::vector<double> losses_of(const ClassifierState& cls, const LabeledFeatures& data) {
  const Vector l = per_sample_losses(cls, data.features, data.labels);
  return {l.data(), l.data() + l.size()};
}

}  // namespace

MiaResult mia_score(const ClassifierState& cls, const LabeledFeatures& forget,
                    const LabeledFeatures& retain, const LabeledFeatures& test) {
  return mia_from_losses(losses_of(cls, forget), losses_of(cls, retain),
                         losses_of(cls, test));
}

double w1_discrete(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw ParameterError("w1: distributions differ in size");
  return 0.5 * (p - q).cwiseAbs().sum();
}

double w1_output_distance(const ClassifierState& a, const ClassifierState& b,
                          const Matrix& features) {
  if (a.class_count() != b.class_count()) {
    throw ParameterError("w1_output_distance: models have different class counts");
  }
  if (features.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const Vector z = features.row(i).transpose();
    total += w1_discrete(forward_probs(a, z), forward_probs(b, z));
  }
  return total / static_cast<double>(features.rows());
}

KlResult kl_divergence(const Vector& reference, const Vector& model) {
  if (reference.size() != model.size()) {
    throw ParameterError("kl_divergence: distributions differ in size");
  }
  KlResult out;
  for (Eigen::Index k = 0; k < reference.size(); ++k) {
    const double r = reference(k);
    if (r <= 0.0) continue;
    double m = model(k);
    if (m < kProbabilityFloor) {
      m = kProbabilityFloor;
      out.clamped = true;
    }
    out.value += r * (std::log(r) - std::log(m));
  }
  // Rounding can leave a tiny negative value for identical distributions.
  out.value = std::max(out.value, 0.0);
  return out;
}

KlResult kl_to_reference(const ClassifierState& cls, const Matrix& contexts,
                         const std::vector<Vector>& references) {
  if (contexts.rows() != static_cast<Eigen::Index>(references.size())) {
    throw ParameterError("kl_to_reference: one reference per context is required");
  }
  if (references.empty()) throw ParameterError("kl_to_reference: no contexts");
  KlResult out;
  for (Eigen::Index i = 0; i < contexts.rows(); ++i) {
    const KlResult one = kl_divergence(references[static_cast<std::size_t>(i)],
                                       forward_probs(cls, contexts.row(i).transpose()));
    out.value += one.value;
    out.clamped = out.clamped || one.clamped;
  }
  out.value /= static_cast<double>(contexts.rows());
  return out;
}

SplitEvaluator::SplitEvaluator(LabeledFeatures forget, LabeledFeatures retain,
                               LabeledFeatures test,
                               std::optional<ClassifierState> reference)
    : forget_(std::move(forget)),
      retain_(std::move(retain)),
      test_(std::move(test)),
      reference_(std::move(reference)) {
  const Eigen::Index d = forget_.features.cols();
  all_features_.resize(forget_.features.rows() + retain_.features.rows() +
                           test_.features.rows(),
                       d);
  all_features_ << forget_.features, retain_.features, test_.features;
}

EvalReport SplitEvaluator::operator()(const ClassifierState& cls) const {
  const auto start = std::chrono::steady_clock::now();
  EvalReport r;
  r.acc_forget = accuracy(cls, forget_);
  r.acc_retain = accuracy(cls, retain_);
  r.acc_test = accuracy(cls, test_);
  r.mia = mia_score(cls, forget_, retain_, test_).score;
  if (reference_) r.w_dist = w1_output_distance(cls, *reference_, all_features_);
  r.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

const std::vector<std::string>& eval_csv_columns() {
  static const std::vector<std::string> columns = {
      "run_id", "method",  "seed",      "acc_forget", "acc_retain", "acc_test",
      "mia",    "w_dist",  "kl_retain", "kl_forget",  "runtime_seconds"};
  return columns;
}

}  // namespace unlearn_lab
