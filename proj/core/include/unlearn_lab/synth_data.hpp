#pragma once

#include "unlearn_lab/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace unlearn_lab {

/// Feature/label pairs generated from a seed.
///
/// Every label is in [0, class_count) and every class appears at least once.
struct LabeledDataset {
  Matrix features;  // n x d_in
  Labels labels;    // n
  int class_count = 0;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int input_dim() const { return static_cast<int>(features.cols()); }

  // Throws ParameterError if any invariant is broken.
  void validate() const;

  bool operator==(const LabeledDataset& other) const;
};

enum class SplitMode { class_wise, sample_random };

std::string to_string(SplitMode mode);
SplitMode split_mode_from_string(const std::string& name);

/// Partition of a dataset into forget / retain / test index sets.
///
/// forget and retain partition the train portion; test is disjoint from both
/// and is a stratified held-out fraction fixed by the dataset seed.
struct SplitSpec {
  SplitMode mode = SplitMode::class_wise;
  int target_class = 0;    // class_wise
  double fraction = 0.0;   // sample_random
  std::uint64_t seed = 0;  // sample_random
  IndexList forget;
  IndexList retain;
  IndexList test;

  IndexList train() const;  // forget ∪ retain, sorted
};

struct SplitParams {
  SplitMode mode = SplitMode::class_wise;
  int target_class = 0;
  double fraction = 0.1;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
};

enum class MarkovSource { retain, forget1, forget2 };

std::string to_string(MarkovSource source);
MarkovSource markov_source_from_string(const std::string& name);

// States a source's chain moves among: {1,2,3}, {4,5,6} or {7,8,9}.
std::vector<int> markov_states(MarkovSource source);

inline constexpr int kMarkovStateCount = 10;

struct MarkovCorpus {
  std::vector<std::vector<int>> sequences;
  std::vector<MarkovSource> sources;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(sequences.size()); }
  int length() const {
    return sequences.empty() ? 0 : static_cast<int>(sequences.front().size());
  }
  bool operator==(const MarkovCorpus& other) const = default;
};

/// Isotropic Gaussian clusters, one per class, n_per_class samples each.
///
/// Class means are orthonormal directions (a seeded rotation of the first C
/// coordinate axes, or seeded random unit vectors when C > d_in). `spread` is
/// the per-coordinate standard deviation of each cluster.
LabeledDataset gen_gaussian_classes(int class_count, int input_dim,
                                    int n_per_class, double spread,
                                    std::uint64_t seed);

// Equal numbers of retain, forget1 and forget2 sequences (in that order).
MarkovCorpus gen_markov_sequences(int n_per_source, int length,
                                  std::uint64_t seed);

// Stratified held-out test indices; depends only on labels and seed.
IndexList stratified_test_indices(const LabeledDataset& ds,
                                  double test_fraction);

SplitSpec make_split(const LabeledDataset& ds, const SplitParams& params);

// Test rows used for accuracy and as MIA non-members. Class-wise splits drop
// the target class: a model that forgot it cannot be scored on it.
IndexList evaluation_test_indices(const SplitSpec& split, const Labels& labels);

}  // namespace unlearn_lab
