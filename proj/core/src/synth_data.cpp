#include "unlearn_lab/synth_data.hpp"

#include "unlearn_lab/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

namespace unlearn_lab {

LabeledFeatures select_rows(const Matrix& features, const Labels& labels,
                            const IndexList& rows) {
  LabeledFeatures out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || r >= features.rows() ||
        r >= static_cast<int>(labels.size())) {
      throw ParameterError("select_rows: row " + std::to_string(r) +
                           " out of range");
    }
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
    out.labels.push_back(labels[static_cast<std::size_t>(r)]);
  }
  return out;
}

void LabeledDataset::validate() const {
  if (class_count < 1) throw ParameterError("dataset: class_count must be >= 1");
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ParameterError("dataset: feature rows do not match label count");
  }
  if (size() < class_count) throw ParameterError("dataset: n < class_count");
  std::vector<int> seen(static_cast<std::size_t>(class_count), 0);
  for (int y : labels) {
    if (y < 0 || y >= class_count) {
      throw ParameterError("dataset: label " + std::to_string(y) +
                           " outside [0, " + std::to_string(class_count) + ")");
    }
    ++seen[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < class_count; ++c) {
    if (seen[static_cast<std::size_t>(c)] == 0) {
      throw ParameterError("dataset: class " + std::to_string(c) + " is empty");
    }
  }
}

bool LabeledDataset::operator==(const LabeledDataset& other) const {
  return class_count == other.class_count && seed == other.seed &&
         labels == other.labels && features.rows() == other.features.rows() &&
         features.cols() == other.features.cols() &&
         features == other.features;
}

std::string to_string(SplitMode mode) {
  return mode == SplitMode::class_wise ? "class_wise" : "sample_random";
}

SplitMode split_mode_from_string(const std::string& name) {
  if (name == "class_wise") return SplitMode::class_wise;
  if (name == "sample_random") return SplitMode::sample_random;
  throw ParameterError("unknown split mode '" + name +
                       "' (expected class_wise or sample_random)");
}

IndexList SplitSpec::train() const {
  IndexList out = forget;
  out.insert(out.end(), retain.begin(), retain.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::string to_string(MarkovSource source) {
  switch (source) {
    case MarkovSource::retain: return "retain";
    case MarkovSource::forget1: return "forget1";
    case MarkovSource::forget2: return "forget2";
  }
  return "retain";
}

MarkovSource markov_source_from_string(const std::string& name) {
  if (name == "retain") return MarkovSource::retain;
  if (name == "forget1") return MarkovSource::forget1;
  if (name == "forget2") return MarkovSource::forget2;
  throw ParameterError("unknown markov source '" + name + "'");
}

std::vector<int> markov_states(MarkovSource source) {
  switch (source) {
    case MarkovSource::retain: return {1, 2, 3};
    case MarkovSource::forget1: return {4, 5, 6};
    case MarkovSource::forget2: return {7, 8, 9};
  }
  return {};
}

namespace {

// Orthonormal class means: a seeded rotation of the first C axes, or random
// unit vectors when there are more classes than dimensions.
Matrix class_means(int class_count, int input_dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix gaussian(input_dim, std::max(class_count, input_dim));
  for (Eigen::Index j = 0; j < gaussian.cols(); ++j) {
    for (Eigen::Index i = 0; i < gaussian.rows(); ++i) gaussian(i, j) = normal(rng);
  }
  Matrix means(class_count, input_dim);
  if (class_count <= input_dim) {
    Eigen::HouseholderQR<Matrix> qr(gaussian.leftCols(input_dim));
    const Matrix q = qr.householderQ() * Matrix::Identity(input_dim, input_dim);
    for (int c = 0; c < class_count; ++c) means.row(c) = q.col(c).transpose();
  } else {
    for (int c = 0; c < class_count; ++c) {
      means.row(c) = gaussian.col(c).normalized().transpose();
    }
  }
  return means;
}

}  // namespace

LabeledDataset gen_gaussian_classes(int class_count, int input_dim,
                                    int n_per_class, double spread,
                                    std::uint64_t seed) {
  if (class_count < 2) throw ParameterError("gen_gaussian_classes: C must be >= 2");
  if (input_dim < 2) throw ParameterError("gen_gaussian_classes: d_in must be >= 2");
  if (n_per_class < 5) {
    throw ParameterError("gen_gaussian_classes: n_per_class must be >= 5");
  }
  if (!(spread > 0.0) || !std::isfinite(spread)) {
    throw ParameterError("gen_gaussian_classes: spread must be positive");
  }

  std::mt19937_64 rng(seed);
  const Matrix means = class_means(class_count, input_dim, rng);
  std::normal_distribution<double> normal(0.0, 1.0);

  LabeledDataset ds;
  ds.class_count = class_count;
  ds.seed = seed;
  const int n = class_count * n_per_class;
  ds.features.resize(n, input_dim);
  ds.labels.resize(static_cast<std::size_t>(n));
  int row = 0;
  for (int c = 0; c < class_count; ++c) {
    for (int k = 0; k < n_per_class; ++k, ++row) {
      for (int j = 0; j < input_dim; ++j) {
        ds.features(row, j) = means(c, j) + spread * normal(rng);
      }
      ds.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  return ds;
}

MarkovCorpus gen_markov_sequences(int n_per_source, int length,
                                  std::uint64_t seed) {
  if (n_per_source < 1) throw ParameterError("gen_markov_sequences: n_per_source must be >= 1");
  if (length < 2) throw ParameterError("gen_markov_sequences: length must be >= 2");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 2);
  MarkovCorpus corpus;
  corpus.seed = seed;
  for (MarkovSource source :
       {MarkovSource::retain, MarkovSource::forget1, MarkovSource::forget2}) {
    const std::vector<int> states = markov_states(source);
    for (int s = 0; s < n_per_source; ++s) {
      std::vector<int> seq(static_cast<std::size_t>(length));
      // Each state, the first included, is uniform over the chain's set.
      for (auto& state : seq) state = states[static_cast<std::size_t>(pick(rng))];
      corpus.sequences.push_back(std::move(seq));
      corpus.sources.push_back(source);
    }
  }
  return corpus;
}

IndexList stratified_test_indices(const LabeledDataset& ds,
                                  double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ParameterError("test_fraction must be in [0, 1)");
  }
  // Offset the stream so test selection is not correlated with generation.
  std::mt19937_64 rng(ds.seed ^ 0x9e3779b97f4a7c15ULL);
  IndexList test;
  for (int c = 0; c < ds.class_count; ++c) {
    IndexList members;
    for (int i = 0; i < ds.size(); ++i) {
      if (ds.labels[static_cast<std::size_t>(i)] == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = static_cast<std::size_t>(
        std::lround(test_fraction * static_cast<double>(members.size())));
    test.insert(test.end(), members.begin(),
                members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(test.begin(), test.end());
  return test;
}

SplitSpec make_split(const LabeledDataset& ds, const SplitParams& params) {
  ds.validate();
  SplitSpec split;
  split.mode = params.mode;
  split.test = stratified_test_indices(ds, params.test_fraction);

  const std::set<int> test_set(split.test.begin(), split.test.end());
  IndexList train;
  for (int i = 0; i < ds.size(); ++i) {
    if (!test_set.count(i)) train.push_back(i);
  }

  if (params.mode == SplitMode::class_wise) {
    if (params.target_class < 0 || params.target_class >= ds.class_count) {
      throw ParameterError("make_split: target_class " +
                           std::to_string(params.target_class) + " is not a class");
    }
    split.target_class = params.target_class;
    for (int i : train) {
      if (ds.labels[static_cast<std::size_t>(i)] == params.target_class) {
        split.forget.push_back(i);
      } else {
        split.retain.push_back(i);
      }
    }
  } else {
    if (!(params.fraction > 0.0 && params.fraction < 1.0)) {
      throw ParameterError("make_split: fraction must be in (0, 1)");
    }
    split.fraction = params.fraction;
    split.seed = params.seed;
    IndexList shuffled = train;
    std::mt19937_64 rng(params.seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto take = static_cast<std::size_t>(
        std::lround(params.fraction * static_cast<double>(train.size())));
    split.forget.assign(shuffled.begin(),
                        shuffled.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(split.forget.begin(), split.forget.end());
    const std::set<int> forget_set(split.forget.begin(), split.forget.end());
    for (int i : train) {
      if (!forget_set.count(i)) split.retain.push_back(i);
    }
  }
  if (split.forget.empty()) throw ParameterError("make_split: forget set is empty");
  return split;
}

IndexList evaluation_test_indices(const SplitSpec& split, const Labels& labels) {
  if (split.mode != SplitMode::class_wise) return split.test;
  IndexList out;
  for (int i : split.test) {
    if (labels.at(static_cast<std::size_t>(i)) != split.target_class) out.push_back(i);
  }
  return out;
}

}  // namespace unlearn_lab
