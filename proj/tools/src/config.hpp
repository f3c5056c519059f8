#pragma once

#include "unlearn_lab/divergence.hpp"
#include "unlearn_lab/model.hpp"
#include "unlearn_lab/synth_data.hpp"
#include "unlearn_lab/unlearn.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace unlearn_lab::cli {

struct DatasetSection {
  int class_count = 3;
  int input_dim = 8;
  int n_per_class = 200;
  double spread = 0.7;
  // Stem of a dataset written by `gen`; empty means "generate in memory".
  std::string path;
};

struct SplitSection {
  SplitMode mode = SplitMode::class_wise;
  int target_class = 0;
  double fraction = 0.1;
  double test_fraction = 0.2;
};

struct ModelSection {
  ExtractorKind extractor = ExtractorKind::random_relu;
  int feature_dim = 128;
  TrainConfig train;
  // model.json written by `train`; empty means "train in memory".
  std::string path;
};

struct MetricsSection {
  // Retrain on the retain set to get the W_dist reference.
  bool retrain_reference = true;
};

struct OracleSection {
  int probes = 0;  // 0 = every forget sample
  // "train": training-set Hessian + l2 I (the removal derivation);
  // "forget": damped forget-set Hessian (the unlearning loop's estimate).
  std::string hessian = "train";
};

struct DivergenceSection {
  int seeds = 100;
  int n_forget = 20;
  int dim = 5;
  int steps = 50;
  double eta = 0.1;
  double beta = 1.0;
  divergence::ReplayMode mode = divergence::ReplayMode::frozen;
  std::vector<std::string> schemes = {"ga", "npo", "imu"};
};

struct MarkovSection {
  int n_per_source = 200;
  int length = 20;
  double l2 = 1e-4;
  double eta = 1.0;
  int epochs = 40;
  int nu = 0;
  std::vector<std::string> methods = {"imu", "ga", "npo", "simnpo"};
};

/// Everything one CLI invocation needs. All seeds derive from `seed`:
/// dataset seed = seed, extractor seed = seed + 100, unlearning rng = seed.
struct ExperimentConfig {
  std::string preset = "gaussian3";
  std::uint64_t seed = 1;
  DatasetSection dataset;
  SplitSection split;
  ModelSection model;
  UnlearnConfig unlearn;
  MetricsSection metrics;
  OracleSection oracle;
  DivergenceSection divergence;
  MarkovSection markov;
  std::string output_dir = "out";

  std::uint64_t extractor_seed() const { return seed + 100; }
  void validate() const;
};

// Names accepted by --preset.
const std::vector<std::string>& preset_names();

/// gaussian3: class-wise desk (C=3, d_in=8, 200 per class, spread 0.7,
///   128 random-ReLU features, l2 1e-3, IMU eta 1 for 24 epochs).
/// loo: the influence-fidelity problem (60 per class, spread 0.5,
///   16 features, newton training).
/// markov: the sequence case study.
ExperimentConfig make_preset(const std::string& name);

nlohmann::json to_json(const ExperimentConfig& cfg);
// Throws ParameterError naming the offending key.
ExperimentConfig from_json(const nlohmann::json& j);

/// Sets a dotted key such as "unlearn.eta" from its command line text. The
/// value is parsed according to the type of the current entry. Unknown keys
/// throw ParameterError.
void apply_override(nlohmann::json& j, const std::string& key,
                    const std::string& value);

}  // namespace unlearn_lab::cli
