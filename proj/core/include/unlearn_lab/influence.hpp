#pragma once

#include "unlearn_lab/model.hpp"
#include "unlearn_lab/types.hpp"

#include <Eigen/Cholesky>

#include <optional>
#include <vector>

namespace unlearn_lab {

// Lower bound on the Hessian scale used by relative damping.
inline constexpr double kRelativeDampingFloor = 1e-6;

/// Damping added to the classifier Hessian before factorization.
///
/// With `relative` set the ridge is
/// value * max(mean(diag(H)), kRelativeDampingFloor), otherwise it is `value`.

struct Damping {
  double value = 1e-3;
  bool relative = true;

  double resolve(const Matrix& hessian) const;
};

/// Cholesky factorization of a damped Hessian shared by all influence solves.
class HessianFactor {
 public:
  // Throws NumericError (naming the damping) if `hessian` is not positive
  // definite.
  HessianFactor(Matrix hessian, double damping_used);

  // Assembles (1/m) sum_i H_i over `features` and adds the resolved damping.
  static HessianFactor assemble(const ClassifierState& cls,
                                const Matrix& features, const Damping& damping);

  // Returns H^{-1} rhs. Throws NumericError if the relative residual
  // ||H s - rhs|| / ||rhs|| exceeds 1e-8.
  Vector solve(const Vector& rhs) const;

  const Matrix& hessian() const { return hessian_; }
  double damping_used() const { return damping_used_; }
  int dim() const { return static_cast<int>(hessian_.rows()); }

 private:
  Matrix hessian_;
  double damping_used_;
  Eigen::LLT<Matrix> llt_;
};

inline constexpr double kSolveResidualTol = 1e-8;

// -H^{-1} g: first-order parameter shift from up-weighting a sample.
Vector influence_self(const HessianFactor& hessian, const Vector& gradient);

/// Change in the mean target-set loss predicted for each probe sample:
/// I(x, D) = -grad L(D)^T H^{-1} grad l(x), with grad L(D) the mean
/// per-sample gradient over `target`.
///
/// One solve serves every probe since H is symmetric.
Vector influence_on_set(const ClassifierState& cls, const LabeledFeatures& probes,
                        const LabeledFeatures& target,
                        const HessianFactor& hessian);

// influence_on_set with the forget set as both probes and target.
Vector influence_on_forget(const ClassifierState& cls,
                           const LabeledFeatures& forget,
                           const HessianFactor& hessian);

// mask[i] = raw[i] < 0 (zeros are not selected).
std::vector<bool> select_negative(const Vector& raw);

/// Keeps the ceil(r * k) selected entries with the largest |raw|, k being the
/// number of selected entries. Ties go to the lower index.
std::vector<bool> select_top_r(const Vector& raw, const std::vector<bool>& selected,
                               double top_ratio);

// Linear-interpolated percentile (q in [0, 100]) of a non-empty sample.
double percentile(std::vector<double> values, double q);

/// Weights proportional to min(sqrt|raw_i|, T_q) over the selection, where
/// T_q is the q-th percentile of the selected sqrt-magnitudes. The weights sum
/// to 1 over the selection and are zero elsewhere. Returns nullopt when
/// nothing is selected.
std::optional<Vector> normalize_weights(const Vector& raw,
                                        const std::vector<bool>& selected,
                                        double percentile_q);

struct InfluenceOptions {
  Damping damping;
  double percentile = 95.0;
  double top_ratio = 1.0;
};

struct InfluenceReport {
  Vector raw;
  std::vector<bool> selected;
  Vector weights;
  double truncation_percentile = 95.0;
  double damping_used = 0.0;
  bool empty_selection = false;

  int selected_count() const;
};

/// Hessian over the forget set, forget-set influence, negative selection,
/// optional top-r filter and normalized weights. An empty selection leaves
/// `weights` all-zero and sets `empty_selection`.
InfluenceReport compute_influence_report(const ClassifierState& cls,
                                         const LabeledFeatures& forget,
                                         const InfluenceOptions& options);

struct LooRecord {
  int index = 0;  // position in the training set
  double delta_loss = 0.0;  // mean forget loss after removal minus before
};

struct LooProblem {
  LabeledFeatures train;
  IndexList forget;  // positions within `train`
  int class_count = 0;
};

/// Exact leave-one-out retraining for each probe position. Every retrain is
/// warm-started from the full-data optimum. Requires cfg.l2 > 0.
std::vector<LooRecord> loo_oracle(const LooProblem& problem,
                                  const IndexList& probes,
                                  const TrainConfig& cfg);

}  // namespace unlearn_lab
