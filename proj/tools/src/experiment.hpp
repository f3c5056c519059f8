#pragma once

#include "config.hpp"

#include "unlearn_lab/io.hpp"
#include "unlearn_lab/metrics.hpp"
#include "unlearn_lab/model.hpp"
#include "unlearn_lab/synth_data.hpp"
#include "unlearn_lab/unlearn.hpp"

#include <optional>

namespace unlearn_lab::cli {

/// Dataset, split, features and trained models for one class-wise or
/// sample-wise experiment. `test` holds the evaluation rows (the target class
/// is dropped in class-wise mode).
struct Experiment {
  LabeledDataset data;
  SplitSpec split;
  FeatureExtractor extractor = FeatureExtractor::identity(1);
  Matrix features;  // every dataset row through the extractor
  IndexList test_ids;
  LabeledFeatures train;
  LabeledFeatures forget;
  LabeledFeatures retain;
  LabeledFeatures test;
  TrainResult original;
  std::optional<ClassifierState> retrained;
  double prepare_seconds = 0.0;

  UnlearnProblem problem(const TrainConfig& train_cfg) const;
  SplitEvaluator evaluator() const;
  // Positions of the forget rows inside `train`.
  IndexList forget_positions() const;
};

// Loaded from dataset.path when set, generated from the config otherwise.
io::DatasetFile resolve_dataset(const ExperimentConfig& cfg);

SplitSpec resolve_split(const ExperimentConfig& cfg, const io::DatasetFile& file);

FeatureExtractor make_extractor(const ExperimentConfig& cfg, int input_dim);

/// Builds everything up to the original model. A model file replaces
/// training (and its extractor replaces the configured one); the retrained
/// reference is fitted only when metrics.retrain_reference is set.
Experiment prepare_experiment(const ExperimentConfig& cfg,
                              const std::optional<io::ModelFile>& model = std::nullopt);

}  // namespace unlearn_lab::cli
