#include "experiment.hpp"

#include "unlearn_lab/error.hpp"

#include <algorithm>
#include <chrono>

namespace unlearn_lab::cli {

UnlearnProblem Experiment::problem(const TrainConfig& train_cfg) const {
  UnlearnProblem p;
  p.original = original.state;
  p.forget = forget;
  p.retain = retain;
  p.train = train_cfg;
  p.class_count = data.class_count;
  p.train_size = train.size();
  return p;
}

SplitEvaluator Experiment::evaluator() const {
  return SplitEvaluator(forget, retain, test, retrained);
}

IndexList Experiment::forget_positions() const {
  const IndexList ids = split.train();
  IndexList pos;
  for (int f : split.forget) {
    const auto it = std::lower_bound(ids.begin(), ids.end(), f);
    pos.push_back(static_cast<int>(it - ids.begin()));
  }
  return pos;
}

io::DatasetFile resolve_dataset(const ExperimentConfig& cfg) {
  if (!cfg.dataset.path.empty()) return io::load_dataset(cfg.dataset.path);
  io::DatasetFile file;
  file.data = gen_gaussian_classes(cfg.dataset.class_count, cfg.dataset.input_dim,
                                   cfg.dataset.n_per_class, cfg.dataset.spread, cfg.seed);
  return file;
}

SplitSpec resolve_split(const ExperimentConfig& cfg, const io::DatasetFile& file) {
  if (file.split) return *file.split;
  SplitParams params;
  params.mode = cfg.split.mode;
  params.target_class = cfg.split.target_class;
  params.fraction = cfg.split.fraction;
  params.seed = cfg.seed;
  params.test_fraction = cfg.split.test_fraction;
  return make_split(file.data, params);
}

FeatureExtractor make_extractor(const ExperimentConfig& cfg, int input_dim) {
  if (cfg.model.extractor == ExtractorKind::identity) return FeatureExtractor::identity(input_dim);
  return FeatureExtractor::random_relu(input_dim, cfg.model.feature_dim, cfg.extractor_seed());
}

Experiment prepare_experiment(const ExperimentConfig& cfg,
                              const std::optional<io::ModelFile>& model) {
  const auto start = std::chrono::steady_clock::now();
  Experiment ex;
  io::DatasetFile file = resolve_dataset(cfg);
  ex.split = resolve_split(cfg, file);
  ex.data = std::move(file.data);

  if (model) {
    if (model->extractor.input_dim() != ex.data.input_dim()) {
      throw ParameterError("model extractor expects input_dim " +
                           std::to_string(model->extractor.input_dim()) + ", dataset has " +
                           std::to_string(ex.data.input_dim()));
    }
    if (model->classifier.class_count() != ex.data.class_count) {
      throw ParameterError("model has " + std::to_string(model->classifier.class_count()) +
                           " classes, dataset has " + std::to_string(ex.data.class_count));
    }
    ex.extractor = model->extractor;
  } else {
    ex.extractor = make_extractor(cfg, ex.data.input_dim());
  }
  ex.features = ex.extractor.extract_all(ex.data.features);
  ex.test_ids = evaluation_test_indices(ex.split, ex.data.labels);
  ex.train = select_rows(ex.features, ex.data.labels, ex.split.train());
  ex.forget = select_rows(ex.features, ex.data.labels, ex.split.forget);
  ex.retain = select_rows(ex.features, ex.data.labels, ex.split.retain);
  ex.test = select_rows(ex.features, ex.data.labels, ex.test_ids);

  if (model) {
    ex.original.state = model->classifier;
    ex.original.grad_norm = regularized_gradient(ex.original.state, ex.train, cfg.model.train.l2).norm();
    ex.original.objective = regularized_objective(ex.original.state, ex.train, cfg.model.train.l2);
    ex.original.converged = ex.original.grad_norm <= cfg.model.train.tol;
  } else {
    ex.original = train_classifier(ex.train, ex.data.class_count, cfg.model.train);
  }
  if (cfg.metrics.retrain_reference) {
    ex.retrained = retrain_oracle(ex.retain, ex.data.class_count, cfg.model.train);
  }
  ex.prepare_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return ex;
}

}  // namespace unlearn_lab::cli
