#include "support.hpp"

#include "unlearn_lab/divergence.hpp"
#include "unlearn_lab/error.hpp"

#include <cmath>
#include <numeric>

using namespace unlearn_lab;
using namespace unlearn_lab::divergence;
using namespace test_support;

TEST(Logistic, MatchesOracle) {
  const Vector th{{0.4, -0.3, 0.2}};
  const Vector x{{1.0, 0.5, -2.0}};
  EXPECT_NEAR(logistic_confidence(th, 0.1, x, 1), oracle::kLogisticConfidence1, 1e-15);
  EXPECT_NEAR(logistic_confidence(th, 0.1, x, 0), oracle::kLogisticConfidence0, 1e-15);
  expect_near_vec(logistic_step(th, 0.1, x, 0, 0.2, 0.7), vec(oracle::kLogisticStep0), 1e-15);
}

TEST(Logistic, StepArithmetic) {
  const Vector x{{2.0, -1.0}};
  expect_near_vec(logistic_step(Vector::Zero(2), 0.0, x, 1, 0.3, 0.5), 0.3 * 0.5 * x * 0.5, 1e-15);
  // a fully confident sample does not move
  const Vector sure = logistic_step(Vector{{1000.0, 0.0}}, 0.0, Vector{{1.0, 0.0}}, 1, 1.0, 1.0);
  expect_near_vec(sure, Vector{{1000.0, 0.0}}, 0.0);
}

TEST(Logistic, StepIsDescentOnNegativeLogConfidence) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Vector th = random_vector(4, rng), x = random_vector(4, rng);
    const int y = t % 2;
    const double eta = 0.7, w = 0.3;
    const Vector step = (logistic_step(th, 0.2, x, y, eta, w) - th) / (eta * w);
    for (int k = 0; k < 4; ++k) {
      Vector p = th, m = th;
      p(k) += 1e-6;
      m(k) -= 1e-6;
      const double fd = (-std::log(logistic_confidence(p, 0.2, x, y)) +
                         std::log(logistic_confidence(m, 0.2, x, y))) /
                        2e-6;
      EXPECT_NEAR(step(k), -fd, 1e-6);
    }
  }
}

TEST(Norms, DirectNormCases) {
  std::mt19937_64 rng(5);
  const Vector a = random_vector(3, rng), b = random_vector(3, rng);
  Matrix x(4, 3);
  for (int i = 0; i < 4; ++i) x.row(i) = random_vector(3, rng).transpose();
  EXPECT_EQ(weighted_norm_direct(a, a, x), 0.0);
  EXPECT_NEAR(weighted_norm_direct(a, b, Matrix::Identity(3, 3)), (a - b).squaredNorm(), 1e-14);
}

TEST(Norms, QuadraticCases) {
  const Matrix one = Matrix::Ones(1, 1);
  EXPECT_NEAR(weighted_norm_quadratic(Vector::Constant(1, 3.0), gram_matrix(one), Vector::Ones(1)),
              9.0, 1e-15);
  std::mt19937_64 rng(6);
  Matrix x(5, 3);
  for (int i = 0; i < 5; ++i) x.row(i) = random_vector(3, rng).transpose();
  const Matrix g = gram_matrix(x);
  const Vector a = random_vector(5, rng);
  EXPECT_NEAR(weighted_norm_quadratic(a, g, Vector::Ones(5)), a.dot(g * a), 1e-12);
}

TEST(Norms, ShrunkWeightsOnDiagonalGram) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const Vector diag = random_vector(6, rng).cwiseAbs();
    const Matrix g = diag.asDiagonal();
    const Vector a = random_vector(6, rng);
    Vector w(6);
    for (int i = 0; i < 6; ++i) w(i) = unif(rng);
    EXPECT_LE(weighted_norm_quadratic(a, g, w), weighted_norm_quadratic(a, g, Vector::Ones(6)));
  }
}

TEST(EigenBounds, ScaledIdentityIsTight) {
  const Vector a{{1.0, -2.0, 0.5}}, w{{0.2, 0.3, 1.0}};
  const auto b = eigen_bounds_check(a, 2.5 * Matrix::Identity(3, 3), w);
  const double expected = 2.5 * w.cwiseProduct(a).squaredNorm();
  EXPECT_NEAR(b.lower, expected, 1e-14);
  EXPECT_NEAR(b.value, expected, 1e-14);
  EXPECT_NEAR(b.upper, expected, 1e-14);
  const auto zero = eigen_bounds_check(a, 2.5 * Matrix::Identity(3, 3), Vector::Zero(3));
  EXPECT_EQ(zero.lower, 0.0);
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_EQ(zero.upper, 0.0);
}

TEST(EigenBounds, RandomPsdTrials) {
  std::mt19937_64 rng(8);
  int violations = 0;
  for (int t = 0; t < 100; ++t) {
    Matrix x(7, 4);
    for (int i = 0; i < 7; ++i) x.row(i) = random_vector(4, rng).transpose();
    const auto b = eigen_bounds_check(random_vector(7, rng), gram_matrix(x),
                                      random_vector(7, rng).cwiseAbs());
    violations += !b.holds();
  }
  EXPECT_EQ(violations, 0);
}

TEST(EigenBounds, RejectsAsymmetricGram) {
  Matrix g = Matrix::Identity(2, 2);
  g(0, 1) = 1.0;
  EXPECT_THROW(eigen_bounds_check(Vector::Ones(2), g, Vector::Ones(2)), ParameterError);
}

TEST(Replay, FrozenIdentityHoldsOnManySeeds) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto inst = make_logistic_instance(20, 5, seed);
    for (auto scheme : {WeightScheme::ga, WeightScheme::npo, WeightScheme::imu}) {
      ReplayOptions opt;
      opt.scheme = scheme;
      opt.sample_seed = seed;
      const auto state = replay(inst, opt);
      EXPECT_EQ(std::accumulate(state.counts.begin(), state.counts.end(), 0), opt.steps);
      EXPECT_LE((state.gram - state.gram.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      const auto rec = summarize(inst, state, scheme);
      EXPECT_LE(std::abs(rec.direct_norm - rec.quadratic_norm),
                1e-9 * std::max(rec.direct_norm, 1e-300));
      EXPECT_TRUE((EigenBounds{rec.lower, rec.quadratic_norm, rec.upper}.holds()));
    }
  }
}

TEST(Replay, TraceEndsAtTheReplayState) {
  const auto inst = make_logistic_instance(10, 3, 4);
  ReplayOptions opt;
  opt.scheme = WeightScheme::npo;
  opt.steps = 12;
  opt.sample_seed = 4;
  const auto trace = replay_trace(inst, opt);
  ASSERT_EQ(trace.size(), 12U);
  EXPECT_EQ(trace.back().step, 12);
  const auto rec = summarize(inst, replay(inst, opt), opt.scheme);
  EXPECT_NEAR(trace.back().direct_norm, rec.direct_norm, 1e-12 * rec.direct_norm);
}

TEST(Replay, LiveModeIsDeterministic) {
  const auto inst = make_logistic_instance(10, 3, 5);
  ReplayOptions opt;
  opt.mode = ReplayMode::live;
  opt.scheme = WeightScheme::imu;
  opt.sample_seed = 2;
  EXPECT_EQ(replay(inst, opt).theta_t, replay(inst, opt).theta_t);
}

TEST(SchemeWeights, Values) {
  const auto inst = make_logistic_instance(8, 3, 9);
  expect_near_vec(scheme_weights(inst, inst.theta0, WeightScheme::ga), Vector::Ones(8), 0.0);
  expect_near_vec(scheme_weights(inst, inst.theta_ref, WeightScheme::npo), Vector::Ones(8), 1e-15);
  const Vector imu = scheme_weights(inst, inst.theta0, WeightScheme::imu);
  EXPECT_NEAR(imu.sum(), 1.0, 1e-12);
  EXPECT_GE(imu.minCoeff(), 0.0);
}

TEST(SchemeNames, RoundTrip) {
  for (auto s : {WeightScheme::ga, WeightScheme::npo, WeightScheme::imu}) {
    EXPECT_EQ(weight_scheme_from_string(to_string(s)), s);
  }
  EXPECT_EQ(replay_mode_from_string("live"), ReplayMode::live);
  EXPECT_THROW(weight_scheme_from_string("x"), ParameterError);
}
