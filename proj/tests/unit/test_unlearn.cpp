#include "support.hpp"

#include "unlearn_lab/error.hpp"
#include "unlearn_lab/metrics.hpp"
#include "unlearn_lab/synth_data.hpp"
#include "unlearn_lab/unlearn.hpp"

#include <cmath>

using namespace unlearn_lab;
using namespace test_support;

namespace {

LabeledFeatures forget_rows() {
  const auto data = oracle_problem();
  return select_rows(data.features, data.labels,
                     IndexList(oracle::kForget.begin(), oracle::kForget.end()));
}

LabeledFeatures retain_rows() {
  const auto data = oracle_problem();
  IndexList idx;
  for (int i = 4; i < data.size(); ++i) idx.push_back(i);
  return select_rows(data.features, data.labels, idx);
}

UnlearnConfig config(Method m, double eta, int epochs) {
  UnlearnConfig c;
  c.method = m;
  c.learning_rate = eta;
  c.epochs = epochs;
  return c;
}

EpochEvaluator record_states(std::vector<Vector>& out) {
  return [&out](const ClassifierState& s) {
    out.push_back(s.flatten());
    return EvalReport{};
  };
}

}  // namespace

TEST(Methods, NamesRoundTrip) {
  for (const auto& name : method_names()) EXPECT_EQ(to_string(method_from_string(name)), name);
  try {
    method_from_string("bogus");
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("imu"), std::string::npos);
  }
}

TEST(UnlearnConfig, Validation) {
  UnlearnConfig c;
  EXPECT_NO_THROW(c.validate());
  c.top_ratio = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = UnlearnConfig{};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = UnlearnConfig{};
  c.update_frequency = -1;
  EXPECT_THROW(c.validate(), ParameterError);
  c = UnlearnConfig{};
  c.percentile = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = UnlearnConfig{};
  c.target_forget_accuracy = 2.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Schedule, UpdateFrequency) {
  EXPECT_TRUE(influence_update_due(0, 0));
  EXPECT_FALSE(influence_update_due(3, 0));
  EXPECT_TRUE(influence_update_due(3, 1));
  EXPECT_TRUE(influence_update_due(4, 2));
  EXPECT_FALSE(influence_update_due(5, 2));
}

TEST(Imu, UniformWeightsCollapseToGradientAscent) {
  const auto model = oracle_state(oracle::kThetaStar);
  auto imu_cfg = config(Method::imu, 0.3, 5);
  imu_cfg.force_uniform_weights = true;
  std::vector<Vector> imu_states, ga_states;
  run_imu(model, forget_rows(), imu_cfg, record_states(imu_states));
  run_ga(model, forget_rows(), config(Method::ga, 0.3, 5), record_states(ga_states));
  ASSERT_EQ(imu_states.size(), 5U);
  ASSERT_EQ(ga_states.size(), 5U);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_LE((imu_states[t] - ga_states[t]).norm(), 1e-10);
}

TEST(Imu, OneStepUsesOracleWeights) {
  const auto model = oracle_state(oracle::kThetaStar);
  auto cfg = config(Method::imu, 0.5, 1);
  cfg.damping = Damping{1e-3, false};
  const auto forget = forget_rows();
  const auto run = run_imu(model, forget, cfg);
  Vector expected = model.flatten();
  for (int i = 0; i < forget.size(); ++i) {
    expected += 0.5 * oracle::kWeightsForgetH[static_cast<std::size_t>(i)] *
                grad_classifier(model, forget.features.row(i).transpose(), forget.labels[i]);
  }
  expect_near_vec(run.final_state.flatten(), expected, 1e-9);
  ASSERT_EQ(run.influence_updates.size(), 1U);
}

TEST(Imu, L1TermShrinksTowardZero) {
  const auto model = oracle_state(oracle::kThetaStar);
  auto cfg = config(Method::imu, 0.0, 1);
  cfg.l1_strength = 0.1;
  // eta = 0 disables both terms
  EXPECT_EQ(run_imu(model, forget_rows(), cfg).final_state.flatten(), model.flatten());
  cfg.learning_rate = 1e-3;
  auto plain = cfg;
  plain.l1_strength = 0.0;
  const Vector with = run_imu(model, forget_rows(), cfg).final_state.flatten();
  const Vector without = run_imu(model, forget_rows(), plain).final_state.flatten();
  const Vector sign = model.flatten().unaryExpr([](double x) { return double((x > 0) - (x < 0)); });
  expect_near_vec(without - with, 1e-3 * 0.1 * sign, 1e-12);
}

TEST(Imu, EmptySelectionFallsBackToUniform) {
  auto sharp = ClassifierState::zeros(2, 1);
  sharp.bias << 800.0, 0.0;
  LabeledFeatures fitted{Matrix::Zero(2, 1), {0, 0}};
  const auto run = run_imu(sharp, fitted, config(Method::imu, 0.1, 1));
  ASSERT_EQ(run.warnings.size(), 1U);
  EXPECT_TRUE(run.influence_updates.front().empty_selection);
  expect_near_vec(run.per_epoch_weights.front(), Vector::Constant(2, 0.5), 0.0);
}

TEST(Imu, RecomputesOnSchedule) {
  const auto model = oracle_state(oracle::kThetaStar);
  auto cfg = config(Method::imu, 0.1, 4);
  cfg.update_frequency = 2;
  EXPECT_EQ(run_imu(model, forget_rows(), cfg).influence_updates.size(), 2U);
  cfg.update_frequency = 0;
  EXPECT_EQ(run_imu(model, forget_rows(), cfg).influence_updates.size(), 1U);
  cfg.method = Method::ga;
  EXPECT_THROW(run_imu(model, forget_rows(), cfg), ParameterError);
}

TEST(Imu, StopsAtTargetForgetAccuracy) {
  const auto model = oracle_state(oracle::kThetaStar);
  const auto forget = forget_rows();
  auto cfg = config(Method::imu, 2.0, 50);
  cfg.target_forget_accuracy = 0.0;
  const EpochEvaluator eval = [&](const ClassifierState& s) {
    EvalReport r;
    r.acc_forget = accuracy(s, forget);
    return r;
  };
  const auto run = run_imu(model, forget, cfg, eval);
  ASSERT_FALSE(run.per_epoch.empty());
  EXPECT_LT(run.per_epoch.size(), 50U);
  EXPECT_EQ(run.per_epoch.back().acc_forget, 0.0);
}

TEST(Imu, MiniBatchesCoverTheForgetSet) {
  const auto model = oracle_state(oracle::kThetaStar);
  auto cfg = config(Method::imu, 0.1, 3);
  cfg.force_uniform_weights = true;
  cfg.batch_size = 2;
  cfg.rng_seed = 9;
  const auto a = run_imu(model, forget_rows(), cfg);
  const auto b = run_imu(model, forget_rows(), cfg);
  EXPECT_EQ(a.final_state.flatten(), b.final_state.flatten());
  EXPECT_GT(mean_loss(a.final_state, forget_rows()), mean_loss(model, forget_rows()));
}

TEST(Ga, StepFromOptimumRaisesForgetLoss) {
  const auto model = oracle_state(oracle::kThetaStar);
  const auto run = run_ga(model, forget_rows(), config(Method::ga, 1e-3, 1));
  EXPECT_GT(mean_loss(run.final_state, forget_rows()), mean_loss(model, forget_rows()));
  const auto still = run_ga(model, forget_rows(), config(Method::ga, 0.0, 3));
  EXPECT_EQ(still.final_state.flatten(), model.flatten());
}

TEST(Ga, DivergenceHaltsWithWarning) {
  const auto model = oracle_state(oracle::kThetaStar);
  const auto run = run_ga(model, forget_rows(), config(Method::ga, 1e308, 10));
  EXPECT_TRUE(run.diverged);
  EXPECT_FALSE(run.warnings.empty());
}

TEST(RandomLabel, NeverTrueAndDeterministic) {
  const Labels y = {0, 1, 2, 0, 1, 2, 2, 2};
  const auto a = random_incorrect_labels(y, 3, 4);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NE(a[i], y[i]);
  EXPECT_EQ(a, random_incorrect_labels(y, 3, 4));
  const auto model = oracle_state(oracle::kThetaStar);
  auto cfg = config(Method::rl, 0.5, 20);
  cfg.rng_seed = 4;
  const auto run = run_rl(model, forget_rows(), cfg);
  EXPECT_LE(accuracy(run.final_state, forget_rows()), accuracy(model, forget_rows()));
}

TEST(Npo, WeightValues) {
  EXPECT_EQ(npo_weight(0.37, 0.37, 1.0), 1.0);
  EXPECT_EQ(npo_weight(0.37, 0.37, 1e-4), 1.0);
  EXPECT_NEAR(npo_weight(0.8, 0.4, 1.0), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(npo_weight(0.3, 0.6, 0.5), oracle::kNpoWeight, 1e-15);
  EXPECT_NEAR(simnpo_weight(0.3, 0.5), oracle::kSimNpoWeight, 1e-15);
  EXPECT_NEAR(simnpo_weight(1.0, 2.0), 1.0, 1e-15);
  EXPECT_LT(simnpo_weight(1e-12, 1.0), 1e-11);
}

TEST(Npo, GradientMatchesAutodiffAndDifferences) {
  std::mt19937_64 rng(12);
  const auto forget = forget_rows();
  for (int t = 0; t < 5; ++t) {
    const auto ref = random_state(3, 2, rng);
    const auto cls = random_state(3, 2, rng);
    const Vector ref_probs = label_probabilities(ref, forget);
    const double beta = 0.5 + t;
    const Vector g = npo_gradient(cls, forget, ref_probs, beta);
    expect_near_vec(g, npo_gradient_autodiff(cls, forget, ref_probs, beta), 1e-12);
    const Vector theta = cls.flatten();
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Vector tp = theta, tm = theta;
      tp(k) += 1e-6;
      tm(k) -= 1e-6;
      const double fd = (npo_loss(ClassifierState::unflatten(tp, 3, 2), forget, ref_probs, beta) -
                         npo_loss(ClassifierState::unflatten(tm, 3, 2), forget, ref_probs, beta)) /
                        2e-6;
      EXPECT_NEAR(g(k), fd, 1e-6);
    }
  }
}

TEST(Npo, SmallBetaFirstStepMatchesGradientAscent) {
  const auto model = oracle_state(oracle::kThetaStar);
  auto cfg = config(Method::npo, 0.1, 1);
  cfg.beta = 1e-4;
  const Vector npo = run_npo(model, forget_rows(), cfg).final_state.flatten() - model.flatten();
  const Vector ga =
      run_ga(model, forget_rows(), config(Method::ga, 0.1, 1)).final_state.flatten() -
      model.flatten();
  EXPECT_GE(npo.dot(ga) / (npo.norm() * ga.norm()), 0.999);
}

TEST(SimNpo, GradientMatchesDifferences) {
  std::mt19937_64 rng(13);
  const auto forget = forget_rows();
  const auto cls = random_state(3, 2, rng);
  const Vector g = simnpo_gradient(cls, forget, 2.0);
  const Vector theta = cls.flatten();
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Vector tp = theta, tm = theta;
    tp(k) += 1e-6;
    tm(k) -= 1e-6;
    const double fd = (simnpo_loss(ClassifierState::unflatten(tp, 3, 2), forget, 2.0) -
                       simnpo_loss(ClassifierState::unflatten(tm, 3, 2), forget, 2.0)) /
                      2e-6;
    EXPECT_NEAR(g(k), fd, 1e-6);
  }
}

TEST(Newton, MatchesOracleAndMovesTowardRetraining) {
  const auto model = oracle_state(oracle::kThetaStar);
  NewtonRemovalOptions opt;
  opt.l2 = oracle::kL2;
  opt.damping = Damping{0.0, false};
  opt.n_retained = 8;
  opt.hessian_features = retain_rows().features;
  const auto removed = newton_removal(model, forget_rows(), opt);
  expect_near_vec(removed.flatten(), vec(oracle::kNewtonRemoved), 1e-9);
  const Vector target = vec(oracle::kRetrained);
  EXPECT_LT((removed.flatten() - target).norm(), (model.flatten() - target).norm());
}

TEST(Newton, EmptyForgetAndLinearity) {
  const auto model = oracle_state(oracle::kThetaStar);
  NewtonRemovalOptions opt;
  opt.l2 = oracle::kL2;
  opt.n_retained = 8;
  EXPECT_EQ(newton_removal(model, LabeledFeatures{Matrix(0, 2), {}}, opt).flatten(),
            model.flatten());
  const HessianFactor h(Matrix::Identity(9, 9) * 2.0, 0.0);
  std::mt19937_64 rng(1);
  const Vector g = random_vector(9, rng);
  expect_near_vec(newton_delta(h, 2.0 * g, 8), 2.0 * newton_delta(h, g, 8), 1e-15);
  opt.l2 = 0.0;
  opt.damping = Damping{0.0, false};
  EXPECT_THROW(newton_removal(model, forget_rows(), opt), ParameterError);
}

TEST(Retrain, MatchesOracleAndForgetsTheClass) {
  TrainConfig cfg;
  cfg.solver = Solver::newton;
  cfg.l2 = oracle::kL2;
  cfg.tol = 1e-11;
  const auto r = retrain_oracle(retain_rows(), 3, cfg);
  expect_near_vec(r.flatten(), vec(oracle::kRetrained), 1e-9);
  EXPECT_EQ(accuracy(r, forget_rows()), 0.0);
  EXPECT_EQ(retrain_oracle(retain_rows(), 3, cfg).flatten(), r.flatten());
  const auto full = train_classifier(oracle_problem(), 3, cfg).state;
  expect_near_vec(retrain_oracle(oracle_problem(), 3, cfg).flatten(), full.flatten(),
                  10 * cfg.tol);
}

TEST(Dispatch, RunsEveryMethod) {
  UnlearnProblem p;
  p.original = oracle_state(oracle::kThetaStar);
  p.forget = forget_rows();
  p.retain = retain_rows();
  p.train.solver = Solver::newton;
  p.train.l2 = oracle::kL2;
  p.class_count = 3;
  p.train_size = 12;
  for (const auto& name : method_names()) {
    auto cfg = config(method_from_string(name), 0.1, 2);
    const auto run = run_unlearning(p, cfg);
    EXPECT_EQ(run.method, cfg.method);
    EXPECT_TRUE(run.final_state.all_finite()) << name;
    EXPECT_FALSE(run.per_epoch.empty()) << name;
  }
  p.retain.reset();
  EXPECT_THROW(run_unlearning(p, config(Method::retrain, 0.1, 1)), ParameterError);
  EXPECT_NO_THROW(run_unlearning(p, config(Method::newton, 0.1, 1)));
}

TEST(Desk, ImuForgetsTheClassAndKeepsRetainAccuracy) {
  const auto ds = gen_gaussian_classes(3, 8, 200, 0.7, 1);
  const auto ex = FeatureExtractor::random_relu(8, 128, 101);
  const Matrix z = ex.extract_all(ds.features);
  SplitParams sp;
  const auto split = make_split(ds, sp);
  const auto forget = select_rows(z, ds.labels, split.forget);
  const auto retain = select_rows(z, ds.labels, split.retain);
  TrainConfig tc;
  tc.solver = Solver::newton;
  tc.tol = 1e-9;
  const auto model = train_classifier(select_rows(z, ds.labels, split.train()), 3, tc).state;
  auto cfg = config(Method::imu, 1.0, 24);
  cfg.target_forget_accuracy = 0.01;
  const EpochEvaluator eval = [&](const ClassifierState& s) {
    EvalReport r;
    r.acc_forget = accuracy(s, forget);
    r.acc_retain = accuracy(s, retain);
    return r;
  };
  const auto run = run_imu(model, forget, cfg, eval);
  EXPECT_LE(run.per_epoch.back().acc_forget, 0.01);
  EXPECT_GE(run.per_epoch.back().acc_retain, accuracy(model, retain) - 0.03);
}
