#pragma once

#include "unlearn_lab/metrics.hpp"
#include "unlearn_lab/model.hpp"
#include "unlearn_lab/synth_data.hpp"
#include "unlearn_lab/unlearn.hpp"

#include <string>
#include <vector>

namespace unlearn_lab::markov {

// One (one-hot(s_t), s_{t+1}) pair per adjacent position.
struct SequencePairs {
  LabeledFeatures pairs;
  std::vector<MarkovSource> sources;

  LabeledFeatures retain() const;
  LabeledFeatures forget() const;  // forget1 and forget2 contexts
};

SequencePairs sequences_to_pairs(const MarkovCorpus& corpus);

// Uniform distribution over the chain that owns `context` (1..9).
Vector chain_reference(int context);

// Population optimum of a model retrained on retain data: uniform over
// {1,2,3}. Only defined for retain contexts; other contexts throw.
Vector retrained_reference(int context);

struct CaseStudyTable {
  double loss_retain = 0.0;
  double loss_forget = 0.0;
  double kl_retain = 0.0;  // vs retrained_reference over contexts 1..3
  double kl_forget = 0.0;  // vs chain_reference over contexts 4..9
};

CaseStudyTable evaluate_sequence_model(const ClassifierState& model,
                                       const SequencePairs& data);

// Mass the model puts on states 4..9, averaged over contexts 4..9.
double forget_state_mass(const ClassifierState& model);

// Conditional distribution of the next state given `context`.
Vector conditional(const ClassifierState& model, int context);

struct CaseStudyConfig {
  int n_per_source = 200;
  int length = 20;
  std::uint64_t seed = 0;
  TrainConfig train;
  std::vector<UnlearnConfig> methods;
};

CaseStudyConfig default_case_study_config();

struct CaseStudyRow {
  Method method = Method::imu;
  CaseStudyTable final_table;
  std::vector<CaseStudyTable> per_epoch;
  double forget_mass = 0.0;
  double wall_clock_seconds = 0.0;
};

struct CaseStudyResult {
  CaseStudyTable original;
  double original_forget_mass = 0.0;
  ClassifierState model;
  std::vector<CaseStudyRow> rows;
};

CaseStudyResult run_case_study(const CaseStudyConfig& cfg);

}  // namespace unlearn_lab::markov
