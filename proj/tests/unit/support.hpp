#pragma once

#include "oracle_values.hpp"

#include "unlearn_lab/model.hpp"
#include "unlearn_lab/types.hpp"

#include <gtest/gtest.h>

#include <random>

namespace test_support {

using unlearn_lab::LabeledFeatures;
using unlearn_lab::Matrix;
using unlearn_lab::Vector;

inline Vector vec(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// The 12-sample problem the python oracle was run on.
inline LabeledFeatures oracle_problem() {
  LabeledFeatures d;
  const auto n = static_cast<Eigen::Index>(oracle::kY.size());
  d.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                              Eigen::RowMajor>>(oracle::kX.data(), n,
                                                                oracle::kDim);
  d.labels = oracle::kY;
  return d;
}

inline unlearn_lab::ClassifierState oracle_state(const std::vector<double>& theta) {
  return unlearn_lab::ClassifierState::unflatten(vec(theta), oracle::kClasses, oracle::kDim);
}

inline unlearn_lab::ClassifierState random_state(int classes, int dim, std::mt19937_64& rng,
                                                 double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  unlearn_lab::ClassifierState s = unlearn_lab::ClassifierState::zeros(classes, dim);
  for (Eigen::Index i = 0; i < s.weights.size(); ++i) s.weights.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < s.bias.size(); ++i) s.bias(i) = n(rng);
  return s;
}

inline Vector random_vector(int dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n(rng);
  return v;
}

inline void expect_near_vec(const Vector& a, const Vector& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_NEAR(a(i), b(i), tol) << "entry " << i;
}

}  // namespace test_support
