#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace unlearn_lab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;
using IndexList = std::vector<int>;

// Features (one row per sample, already passed through the extractor) with
// their class labels.
struct LabeledFeatures {
  Matrix features;
  Labels labels;

  int size() const { return static_cast<int>(labels.size()); }
  bool empty() const { return labels.empty(); }
};

// Row subset of a feature matrix / label vector.
LabeledFeatures select_rows(const Matrix& features, const Labels& labels,
                            const IndexList& rows);

}  // namespace unlearn_lab
