#include "unlearn_lab/markov.hpp"

#include "unlearn_lab/error.hpp"

#include <chrono>

namespace unlearn_lab::markov {

namespace {

LabeledFeatures rows_where(const SequencePairs& data, bool want_forget) {
  IndexList idx;
  for (std::size_t i = 0; i < data.sources.size(); ++i) {
    const bool forget = data.sources[i] != MarkovSource::retain;
    if (forget == want_forget) idx.push_back(static_cast<int>(i));
  }
  return select_rows(data.pairs.features, data.pairs.labels, idx);
}

Vector one_hot(int state) {
  Vector z = Vector::Zero(kMarkovStateCount);
  z(state) = 1.0;
  return z;
}

Vector uniform_over(const std::vector<int>& states) {
  Vector p = Vector::Zero(kMarkovStateCount);
  for (int s : states) p(s) = 1.0 / static_cast<double>(states.size());
  return p;
}

MarkovSource owner_of(int context) {
  if (context >= 1 && context <= 3) return MarkovSource::retain;
  if (context >= 4 && context <= 6) return MarkovSource::forget1;
  if (context >= 7 && context <= 9) return MarkovSource::forget2;
  throw ParameterError("context " + std::to_string(context) + " belongs to no chain (expected 1..9)");
}

double mean_kl(const ClassifierState& model, int first, int last,
               Vector (*reference)(int)) {
  double total = 0.0;
  for (int c = first; c <= last; ++c) {
    total += kl_divergence(reference(c), conditional(model, c)).value;
  }
  return total / static_cast<double>(last - first + 1);
}

}  // namespace

LabeledFeatures SequencePairs::retain() const { return rows_where(*this, false); }
LabeledFeatures SequencePairs::forget() const { return rows_where(*this, true); }

SequencePairs sequences_to_pairs(const MarkovCorpus& corpus) {
  if (corpus.sequences.size() != corpus.sources.size()) {
    throw ParameterError("corpus: one source tag per sequence is required");
  }
  int total = 0;
  for (const auto& seq : corpus.sequences) {
    if (seq.size() < 2) throw ParameterError("corpus: sequences need at least 2 states");
    total += static_cast<int>(seq.size()) - 1;
  }
  SequencePairs out;
  out.pairs.features = Matrix::Zero(total, kMarkovStateCount);
  out.pairs.labels.reserve(static_cast<std::size_t>(total));
  out.sources.reserve(static_cast<std::size_t>(total));
  int row = 0;
  for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
    const auto& seq = corpus.sequences[s];
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      if (seq[t] < 0 || seq[t] >= kMarkovStateCount || seq[t + 1] < 0 ||
          seq[t + 1] >= kMarkovStateCount) {
        throw ParameterError("corpus: state out of range");
      }
      out.pairs.features(row, seq[t]) = 1.0;
      out.pairs.labels.push_back(seq[t + 1]);
      out.sources.push_back(corpus.sources[s]);
      ++row;
    }
  }
  return out;
}

Vector chain_reference(int context) {
  return uniform_over(markov_states(owner_of(context)));
}

Vector retrained_reference(int context) {
  if (owner_of(context) != MarkovSource::retain) {
    throw ParameterError("retrained reference is defined only for retain contexts 1..3");
  }
  return uniform_over(markov_states(MarkovSource::retain));
}

Vector conditional(const ClassifierState& model, int context) {
  if (context < 0 || context >= kMarkovStateCount) {
    throw ParameterError("context out of range");
  }
  return forward_probs(model, one_hot(context));
}

CaseStudyTable evaluate_sequence_model(const ClassifierState& model,
                                       const SequencePairs& data) {
  CaseStudyTable t;
  t.loss_retain = mean_loss(model, data.retain());
  t.loss_forget = mean_loss(model, data.forget());
  t.kl_retain = mean_kl(model, 1, 3, &retrained_reference);
  t.kl_forget = mean_kl(model, 4, 9, &chain_reference);
  return t;
}

double forget_state_mass(const ClassifierState& model) {
  double total = 0.0;
  for (int c = 4; c <= 9; ++c) total += conditional(model, c).segment(4, 6).sum();
  return total / 6.0;
}

CaseStudyConfig default_case_study_config() {
  CaseStudyConfig cfg;
  cfg.train.solver = Solver::newton;
  cfg.train.tol = 1e-9;
  cfg.train.l2 = 1e-4;

  UnlearnConfig base;
  base.learning_rate = 1.0;
  base.epochs = 40;
  for (Method m : {Method::imu, Method::ga, Method::npo, Method::simnpo}) {
    UnlearnConfig c = base;
    c.method = m;
    cfg.methods.push_back(c);
  }
  return cfg;
}

CaseStudyResult run_case_study(const CaseStudyConfig& cfg) {
  for (const auto& m : cfg.methods) {
    if (m.method != Method::imu && m.method != Method::ga && m.method != Method::npo &&
        m.method != Method::simnpo) {
      throw ParameterError("case study methods must be among imu, ga, npo, simnpo");
    }
  }
  const MarkovCorpus corpus = gen_markov_sequences(cfg.n_per_source, cfg.length, cfg.seed);
  const SequencePairs data = sequences_to_pairs(corpus);

  CaseStudyResult result;
  result.model = train_classifier(data.pairs, kMarkovStateCount, cfg.train).state;
  result.original = evaluate_sequence_model(result.model, data);
  result.original_forget_mass = forget_state_mass(result.model);

  UnlearnProblem problem;
  problem.original = result.model;
  problem.forget = data.forget();
  problem.retain = data.retain();
  problem.train = cfg.train;
  problem.class_count = kMarkovStateCount;
  problem.train_size = data.pairs.size();

  for (const auto& method_cfg : cfg.methods) {
    CaseStudyRow row;
    row.method = method_cfg.method;
    const EpochEvaluator eval = [&](const ClassifierState& state) {
      row.per_epoch.push_back(evaluate_sequence_model(state, data));
      EvalReport r;
      r.kl_retain = row.per_epoch.back().kl_retain;
      r.kl_forget = row.per_epoch.back().kl_forget;
      return r;
    };
    const UnlearnRun run = run_unlearning(problem, method_cfg, eval);
    row.final_table = evaluate_sequence_model(run.final_state, data);
    row.forget_mass = forget_state_mass(run.final_state);
    row.wall_clock_seconds = run.wall_clock_seconds;
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace unlearn_lab::markov
