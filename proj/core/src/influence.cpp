#include "unlearn_lab/influence.hpp"

#include "unlearn_lab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace unlearn_lab {

double Damping::resolve(const Matrix& hessian) const {
  if (!(value >= 0.0)) throw ParameterError("damping must be >= 0");
  if (!relative) return value;
  // Fully fit samples drive the Hessian toward zero; the floor keeps the
  // damping above rounding noise in that case.
  const double scale = hessian.diagonal().mean();
  return value * std::max(scale, kRelativeDampingFloor);
}

HessianFactor::HessianFactor(Matrix hessian, double damping_used)
    : hessian_(std::move(hessian)), damping_used_(damping_used), llt_(hessian_) {
  if (llt_.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "Hessian is not positive definite with damping lambda = "
        << damping_used_ << "; increase the damping";
    throw NumericError(msg.str());
  }
}

HessianFactor HessianFactor::assemble(const ClassifierState& cls,
                                      const Matrix& features,
                                      const Damping& damping) {
  Matrix h = hessian_classifier(cls, features, 0.0);
  const double lambda = damping.resolve(h);
  h.diagonal().array() += lambda;
  return HessianFactor(std::move(h), lambda);
}

Vector HessianFactor::solve(const Vector& rhs) const {
  if (rhs.size() != dim()) throw ParameterError("HessianFactor::solve: size mismatch");
  Vector s = llt_.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm > 0.0) {
    const double residual = (hessian_ * s - rhs).norm() / rhs_norm;
    if (!(residual <= kSolveResidualTol)) {
      std::ostringstream msg;
      msg << "influence solve residual " << residual << " exceeds "
          << kSolveResidualTol << " (lambda = " << damping_used_ << ")";
      throw NumericError(msg.str());
    }
  }
  return s;
}

Vector influence_self(const HessianFactor& hessian, const Vector& gradient) {
  return -hessian.solve(gradient);
}

Vector influence_on_set(const ClassifierState& cls, const LabeledFeatures& probes,
                        const LabeledFeatures& target,
                        const HessianFactor& hessian) {
  if (target.empty()) throw ParameterError("influence: empty target set");
  const Vector s = hessian.solve(mean_gradient(cls, target));
  Vector raw(probes.size());
  for (int i = 0; i < probes.size(); ++i) {
    const Vector g = grad_classifier(cls, probes.features.row(i).transpose(),
                                     probes.labels[static_cast<std::size_t>(i)]);
    raw(i) = -s.dot(g);
  }
  return raw;
}

Vector influence_on_forget(const ClassifierState& cls,
                           const LabeledFeatures& forget,
                           const HessianFactor& hessian) {
  return influence_on_set(cls, forget, forget, hessian);
}

std::vector<bool> select_negative(const Vector& raw) {
  std::vector<bool> mask(static_cast<std::size_t>(raw.size()));
  for (Eigen::Index i = 0; i < raw.size(); ++i) mask[static_cast<std::size_t>(i)] = raw(i) < 0.0;
  return mask;
}

std::vector<bool> select_top_r(const Vector& raw, const std::vector<bool>& selected,
                               double top_ratio) {
  if (!(top_ratio > 0.0 && top_ratio <= 1.0)) {
    throw ParameterError("select_top_r: ratio must be in (0, 1]");
  }
  if (selected.size() != static_cast<std::size_t>(raw.size())) {
    throw ParameterError("select_top_r: mask size mismatch");
  }
  std::vector<int> candidates;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i]) candidates.push_back(static_cast<int>(i));
  }
  const auto k = candidates.size();
  // Guard against r * k landing a hair above an integer.
  const auto keep = static_cast<std::size_t>(
      std::ceil(top_ratio * static_cast<double>(k) - 1e-9));
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return std::abs(raw(a)) > std::abs(raw(b));
  });
  std::vector<bool> mask(selected.size(), false);
  for (std::size_t j = 0; j < std::min(keep, k); ++j) {
    mask[static_cast<std::size_t>(candidates[j])] = true;
  }
  return mask;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ParameterError("percentile: empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw ParameterError("percentile: q must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::optional<Vector> normalize_weights(const Vector& raw,
                                        const std::vector<bool>& selected,
                                        double percentile_q) {
  if (!(percentile_q > 0.0 && percentile_q <= 100.0)) {
    throw ParameterError("normalize_weights: percentile must be in (0, 100]");
  }
  if (selected.size() != static_cast<std::size_t>(raw.size())) {
    throw ParameterError("normalize_weights: mask size mismatch");
  }
  std::vector<double> magnitudes;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i]) magnitudes.push_back(std::sqrt(std::abs(raw(static_cast<Eigen::Index>(i)))));
  }
  if (magnitudes.empty()) return std::nullopt;
  const double cap = percentile(magnitudes, percentile_q);

  Vector w = Vector::Zero(raw.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i]) {
      const auto k = static_cast<Eigen::Index>(i);
      w(k) = std::min(std::sqrt(std::abs(raw(k))), cap);
    }
  }
  const double total = w.sum();
  if (!(total > 0.0)) {
    // Every selected magnitude underflowed; fall back to uniform over the
    // selection.
    for (std::size_t i = 0; i < selected.size(); ++i) {
      if (selected[i]) w(static_cast<Eigen::Index>(i)) = 1.0;
    }
    return w / w.sum();
  }
  return w / total;
}

int InfluenceReport::selected_count() const {
  return static_cast<int>(std::count(selected.begin(), selected.end(), true));
}

InfluenceReport compute_influence_report(const ClassifierState& cls,
                                         const LabeledFeatures& forget,
                                         const InfluenceOptions& options) {
  if (forget.empty()) throw ParameterError("influence: forget set is empty");
  const HessianFactor hessian = HessianFactor::assemble(cls, forget.features, options.damping);
  InfluenceReport report;
  report.raw = influence_on_forget(cls, forget, hessian);
  report.damping_used = hessian.damping_used();
  report.truncation_percentile = options.percentile;
  report.selected = select_negative(report.raw);
  if (options.top_ratio < 1.0) {
    report.selected = select_top_r(report.raw, report.selected, options.top_ratio);
  }
  auto weights = normalize_weights(report.raw, report.selected, options.percentile);
  if (weights) {
    report.weights = std::move(*weights);
  } else {
    report.weights = Vector::Zero(report.raw.size());
    report.empty_selection = true;
  }
  return report;
}

std::vector<LooRecord> loo_oracle(const LooProblem& problem,
                                  const IndexList& probes,
                                  const TrainConfig& cfg) {
  if (!(cfg.l2 > 0.0)) {
    throw ParameterError("loo_oracle: requires l2 > 0 (the retraining optimum must be unique)");
  }
  const int n = problem.train.size();
  const LabeledFeatures forget =
      select_rows(problem.train.features, problem.train.labels, problem.forget);
  if (forget.empty()) throw ParameterError("loo_oracle: forget set is empty");

  const TrainResult full = train_classifier(problem.train, problem.class_count, cfg);
  const double before = mean_loss(full.state, forget);

  std::vector<LooRecord> records;
  records.reserve(probes.size());
  for (int probe : probes) {
    if (probe < 0 || probe >= n) {
      throw ParameterError("loo_oracle: probe " + std::to_string(probe) + " out of range");
    }
    IndexList keep;
    keep.reserve(static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
      if (i != probe) keep.push_back(i);
    }
    const LabeledFeatures reduced =
        select_rows(problem.train.features, problem.train.labels, keep);
    const TrainResult loo = train_classifier(reduced, problem.class_count, cfg, full.state);
    records.push_back({probe, mean_loss(loo.state, forget) - before});
  }
  return records;
}

}  // namespace unlearn_lab
