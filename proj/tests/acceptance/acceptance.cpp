// Acceptance run: one PASS/FAIL line per criterion, INFO lines for context.
// Exits 1 if any criterion fails.

#include "config.hpp"
#include "experiment.hpp"

#include "unlearn_lab/divergence.hpp"
#include "unlearn_lab/influence.hpp"
#include "unlearn_lab/markov.hpp"
#include "unlearn_lab/metrics.hpp"
#include "unlearn_lab/model.hpp"
#include "unlearn_lab/stats.hpp"
#include "unlearn_lab/unlearn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace unlearn_lab;
using cli::Experiment;
using cli::ExperimentConfig;

namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void verdict(int id, bool ok, const std::string& detail, double secs) {
  if (!ok) ++g_failures;
  std::printf("%s [%d] %s (%.2f s)\n", ok ? "PASS" : "FAIL", id, detail.c_str(), secs);
  std::fflush(stdout);
}

void info(int id, const std::string& detail) {
  std::printf("INFO [%d] %s\n", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ExperimentConfig desk(std::uint64_t seed) {
  ExperimentConfig cfg = cli::make_preset("gaussian3");
  cfg.seed = seed;
  cfg.unlearn.rng_seed = seed;
  cfg.unlearn.target_forget_accuracy = 0.01;
  return cfg;
}

UnlearnRun unlearn(const Experiment& ex, const ExperimentConfig& cfg, const UnlearnConfig& u) {
  const SplitEvaluator eval = ex.evaluator();
  return run_unlearning(ex.problem(cfg.model.train), u,
                        [&](const ClassifierState& s) { return eval(s); });
}

// ---------------------------------------------------------------- 1

void influence_fidelity() {
  const auto t0 = Clock::now();
  ExperimentConfig cfg = cli::make_preset("loo");
  cfg.metrics.retrain_reference = false;
  const Experiment ex = cli::prepare_experiment(cfg);
  const IndexList positions = ex.forget_positions();
  const double l2 = cfg.model.train.l2;
  const ClassifierState& model = ex.original.state;
  const HessianFactor h(hessian_classifier(model, ex.train.features, l2), l2);
  const Vector infl = influence_on_forget(model, ex.forget, h);
  const auto recs = loo_oracle({ex.train, positions, ex.data.class_count}, positions,
                               cfg.model.train);
  std::vector<double> a, d;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    a.push_back(-infl(static_cast<Eigen::Index>(k)));
    d.push_back(recs[k].delta_loss);
  }
  const double rho = spearman(a, d);
  const double secs = seconds_since(t0);
  verdict(1, rho >= 0.90 && a.size() >= 40 && secs <= 60.0,
          "influence vs leave-one-out: spearman " + fmt("%.4f", rho) + " over " +
              std::to_string(a.size()) + " probes, n=" + std::to_string(ex.train.size()) +
              ", l2=lambda=" + fmt("%g", l2),
          secs);
}

// ---------------------------------------------------------------- 2

void derivatives() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> classes(2, 5), dims(2, 6), rows(5, 20);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double step = 1e-5;
  double worst_g = 0.0, worst_h = 0.0;
  const int instances = 60;
  for (int t = 0; t < instances; ++t) {
    const int c = classes(rng), dim = dims(rng), n = rows(rng);
    const double l2 = t % 2 ? 1e-3 : 0.0;
    LabeledFeatures data;
    data.features = Matrix(n, dim);
    for (Eigen::Index i = 0; i < data.features.size(); ++i) data.features.data()[i] = normal(rng);
    for (int i = 0; i < n; ++i) data.labels.push_back(i % c);
    Vector theta(c * (dim + 1));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = normal(rng);
    const auto at = [&](const Vector& th) { return ClassifierState::unflatten(th, c, dim); };

    const Vector g = regularized_gradient(at(theta), data, l2);
    const Matrix h = hessian_classifier(at(theta), data.features, l2);
    Vector g_fd(theta.size());
    Matrix h_fd(theta.size(), theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Vector tp = theta, tm = theta;
      tp(k) += step;
      tm(k) -= step;
      g_fd(k) = (regularized_objective(at(tp), data, l2) - regularized_objective(at(tm), data, l2)) /
                (2 * step);
      h_fd.col(k) = (regularized_gradient(at(tp), data, l2) - regularized_gradient(at(tm), data, l2)) /
                    (2 * step);
    }
    worst_g = std::max(worst_g, (g - g_fd).norm() / std::max(g_fd.norm(), 1e-12));
    worst_h = std::max(worst_h, (h - h_fd).norm() / std::max(h_fd.norm(), 1e-12));
  }
  const double secs = seconds_since(t0);
  verdict(2, worst_g <= 1e-5 && worst_h <= 1e-5 && secs <= 10.0,
          "gradient/Hessian vs central differences on " + std::to_string(instances) +
              " instances: worst relative error " + fmt("%.2e", worst_g) + " / " +
              fmt("%.2e", worst_h),
          secs);
}

// ---------------------------------------------------------------- 3, 4

struct Desk {
  ExperimentConfig cfg;
  Experiment ex;
};

void ga_collapse(const Desk& d) {
  const auto t0 = Clock::now();
  const auto trace = [&](Method m) {
    UnlearnConfig u = d.cfg.unlearn;
    u.method = m;
    u.epochs = 5;
    u.force_uniform_weights = m == Method::imu;
    u.l1_strength = 0.0;
    u.target_forget_accuracy = -1.0;
    std::vector<Vector> states;
    const auto run = m == Method::imu
                         ? run_imu(d.ex.original.state, d.ex.forget, u,
                                   [&](const ClassifierState& s) {
                                     states.push_back(s.flatten());
                                     return EvalReport{};
                                   })
                         : run_ga(d.ex.original.state, d.ex.forget, u,
                                  [&](const ClassifierState& s) {
                                    states.push_back(s.flatten());
                                    return EvalReport{};
                                  });
    (void)run;
    return states;
  };
  const auto imu = trace(Method::imu);
  const auto ga = trace(Method::ga);
  double worst = imu.size() == 5 && ga.size() == 5 ? 0.0 : INFINITY;
  for (std::size_t t = 0; t < std::min(imu.size(), ga.size()); ++t) {
    worst = std::max(worst, (imu[t] - ga[t]).norm());
  }
  verdict(3, worst <= 1e-10,
          "uniform-weight IMU vs GA over 5 epochs: max parameter distance " + fmt("%.2e", worst),
          seconds_since(t0));
}

void npo_limit(const Desk& d) {
  const auto t0 = Clock::now();
  const ClassifierState& model = d.ex.original.state;
  UnlearnConfig u = d.cfg.unlearn;
  u.epochs = 1;
  u.target_forget_accuracy = -1.0;
  u.method = Method::npo;
  u.beta = 1e-4;
  const Vector npo = run_npo(model, d.ex.forget, u).final_state.flatten() - model.flatten();
  u.method = Method::ga;
  const Vector ga = run_ga(model, d.ex.forget, u).final_state.flatten() - model.flatten();
  const double cosine = npo.dot(ga) / (npo.norm() * ga.norm());

  double worst_w = 0.0;
  const Vector p = label_probabilities(model, d.ex.forget);
  for (double beta : {1e-4, 0.1, 1.0, 5.0}) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      worst_w = std::max(worst_w, std::abs(npo_weight(p(i), p(i), beta) - 1.0));
    }
  }
  verdict(4, cosine >= 0.999 && worst_w <= 1e-12,
          "NPO at beta=1e-4: first-step cosine with GA " + fmt("%.6f", cosine) +
              "; max |W-1| at pi=pi_ref " + fmt("%.1e", worst_w),
          seconds_since(t0));
}

// ---------------------------------------------------------------- 5

void divergence_bounds() {
  const auto t0 = Clock::now();
  double worst_gap = 0.0;
  int violations = 0, checks = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto inst = divergence::make_logistic_instance(20, 5, seed);
    for (auto scheme : {divergence::WeightScheme::ga, divergence::WeightScheme::npo,
                        divergence::WeightScheme::imu}) {
      divergence::ReplayOptions opt;
      opt.scheme = scheme;
      opt.sample_seed = seed;
      for (const auto& rec : divergence::replay_trace(inst, opt)) {
        ++checks;
        const double scale = std::max(std::abs(rec.direct_norm), 1e-300);
        worst_gap = std::max(worst_gap, std::abs(rec.direct_norm - rec.quadratic_norm) / scale);
        if (!divergence::EigenBounds{rec.lower, rec.quadratic_norm, rec.upper}.holds()) {
          ++violations;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  verdict(5, worst_gap <= 1e-9 && violations == 0 && secs <= 10.0,
          "frozen replay on 100 seeds x 3 schemes (" + std::to_string(checks) +
              " checks): max relative gap " + fmt("%.2e", worst_gap) + ", bound violations " +
              std::to_string(violations),
          secs);
}

// ---------------------------------------------------------------- 6

struct ClassWiseOutcome {
  bool ok = false;
  std::string detail;
};

ClassWiseOutcome class_wise_seed(std::uint64_t seed) {
  const ExperimentConfig cfg = desk(seed);
  const Experiment ex = cli::prepare_experiment(cfg);
  const SplitEvaluator eval = ex.evaluator();
  const EvalReport before = eval(ex.original.state);

  const UnlearnRun imu = unlearn(ex, cfg, cfg.unlearn);
  const EvalReport a = imu.per_epoch.back();

  UnlearnConfig g = cfg.unlearn;
  g.method = Method::ga;
  g.epochs = 4 * cfg.unlearn.epochs;
  g.target_forget_accuracy = a.acc_forget;
  const UnlearnRun ga = unlearn(ex, cfg, g);
  const EvalReport b = ga.per_epoch.back();

  const double imu_retain_drop = before.acc_retain - a.acc_retain;
  const double imu_test_drop = before.acc_test - a.acc_test;
  const double ga_retain_drop = before.acc_retain - b.acc_retain;
  const bool matched = b.acc_forget <= a.acc_forget;

  ClassWiseOutcome out;
  out.ok = a.acc_forget <= 0.01 && imu_retain_drop <= 0.03 && imu_test_drop <= 0.03 && matched &&
           ga_retain_drop > imu_retain_drop && b.w_dist > a.w_dist;
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "seed %llu: IMU forget %.2f%% after %zu ep, retain drop %.2f, test drop %.2f, "
                "W %.4f | GA%s forget %.2f%% after %zu ep, retain drop %.2f, W %.4f",
                static_cast<unsigned long long>(seed), 100 * a.acc_forget, imu.per_epoch.size(),
                100 * imu_retain_drop, 100 * imu_test_drop, a.w_dist, matched ? "" : " (unmatched)",
                100 * b.acc_forget, ga.per_epoch.size(), 100 * ga_retain_drop, b.w_dist);
  out.detail = buf;
  return out;
}

void class_wise() {
  const auto t0 = Clock::now();
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = class_wise_seed(seed);
    wins += r.ok;
    info(6, std::string(r.ok ? "" : "[miss] ") + r.detail);
  }
  const double secs = seconds_since(t0);
  verdict(6, wins == 5 && secs <= 300.0,
          "class-wise desk: IMU beats matched GA on " + std::to_string(wins) + "/5 seeds", secs);

  const auto t1 = Clock::now();
  int held = 0;
  for (std::uint64_t seed = 6; seed <= 25; ++seed) held += class_wise_seed(seed).ok;
  info(6, "held-out seeds 6-25: all conditions hold on " + std::to_string(held) + "/20 (" +
              fmt("%.1f", seconds_since(t1)) + " s)");
}

// ---------------------------------------------------------------- 7

void ablations() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = desk(1);
  const Experiment ex = cli::prepare_experiment(cfg);

  UnlearnConfig r = cfg.unlearn;
  r.top_ratio = 0.05;
  const EvalReport top = unlearn(ex, cfg, r).per_epoch.back();

  UnlearnConfig once = cfg.unlearn;
  once.update_frequency = 0;
  UnlearnConfig every = cfg.unlearn;
  every.update_frequency = 1;
  const EvalReport e0 = unlearn(ex, cfg, once).per_epoch.back();
  const EvalReport e1 = unlearn(ex, cfg, every).per_epoch.back();
  const double gap = std::abs(e0.acc_retain - e1.acc_retain);

  verdict(7, top.acc_forget <= 0.01 && gap <= 0.01,
          "r=0.05 forget acc " + fmt("%.2f%%", 100 * top.acc_forget) +
              "; retain acc nu=0 " + fmt("%.2f%%", 100 * e0.acc_retain) + " vs nu=1 " +
              fmt("%.2f%%", 100 * e1.acc_retain) + " (gap " + fmt("%.2f", 100 * gap) + " pt)",
          seconds_since(t0));
}

// ---------------------------------------------------------------- 8, 9

std::vector<double> g_kl_values;

void markov_case_study() {
  const auto t0 = Clock::now();
  int ok_seeds = 0;
  bool ln3_ok = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    markov::CaseStudyConfig mc = markov::default_case_study_config();
    mc.seed = seed;
    std::vector<UnlearnConfig> kept;
    for (auto u : mc.methods) {
      if (u.method == Method::imu || u.method == Method::ga) {
        u.rng_seed = seed;
        kept.push_back(u);
      }
    }
    mc.methods = kept;
    const auto res = markov::run_case_study(mc);
    const auto& imu = res.rows[0].method == Method::imu ? res.rows[0] : res.rows[1];
    const auto& ga = res.rows[0].method == Method::ga ? res.rows[0] : res.rows[1];

    g_kl_values.push_back(res.original.kl_retain);
    g_kl_values.push_back(res.original.kl_forget);
    for (const auto* row : {&imu, &ga}) {
      for (const auto& t : row->per_epoch) {
        g_kl_values.push_back(t.kl_retain);
        g_kl_values.push_back(t.kl_forget);
      }
    }

    const double ln3_gap = std::abs(res.original.loss_retain - std::log(3.0));
    ln3_ok = ln3_ok && ln3_gap <= 0.02;
    const auto& fi = imu.final_table;
    const auto& fg = ga.final_table;
    const bool ok = ln3_gap <= 0.02 && fi.kl_retain <= fg.kl_retain && fi.loss_forget >= fg.loss_forget;
    ok_seeds += ok;

    // Epoch grid: epochs where IMU is no worse on both measures.
    std::size_t both = 0;
    const std::size_t n = std::min(imu.per_epoch.size(), ga.per_epoch.size());
    for (std::size_t t = 0; t < n; ++t) {
      both += imu.per_epoch[t].kl_retain <= ga.per_epoch[t].kl_retain &&
              imu.per_epoch[t].loss_forget >= ga.per_epoch[t].loss_forget;
    }
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "seed %llu: original l_r %.4f (ln3 gap %.4f) | final T=%zu: IMU l_f %.3f KL_r "
                  "%.4f, GA l_f %.3f KL_r %.4f | epochs where IMU dominates: %zu/%zu",
                  static_cast<unsigned long long>(seed), res.original.loss_retain, ln3_gap,
                  imu.per_epoch.size(), fi.loss_forget, fi.kl_retain, fg.loss_forget,
                  fg.kl_retain, both, n);
    info(8, buf);
  }
  const double secs = seconds_since(t0);
  verdict(8, ok_seeds == 3 && secs <= 120.0,
          std::string("Markov case study: IMU KL_r <= GA and l_f >= GA on ") +
              std::to_string(ok_seeds) + "/3 seeds" + (ln3_ok ? "" : "; original l_r off ln 3"),
          secs);
}

void metric_sanity(const Desk& d) {
  const auto t0 = Clock::now();
  const SplitEvaluator eval = d.ex.evaluator();
  const double mia_retrained = eval(*d.ex.retrained).mia;
  const double mia_original = eval(d.ex.original.state).mia;
  const double self = w1_output_distance(d.ex.original.state, d.ex.original.state, d.ex.features);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    Vector p(5), q(5);
    for (int i = 0; i < 5; ++i) {
      p(i) = t % 3 == 0 && i == 0 ? 0.0 : u(rng);
      q(i) = u(rng);
    }
    g_kl_values.push_back(kl_divergence(p / p.sum(), q / q.sum()).value);
  }
  const double min_kl = *std::min_element(g_kl_values.begin(), g_kl_values.end());

  verdict(9, mia_retrained >= 0.95 && mia_original <= 0.2 && self == 0.0 && min_kl >= 0.0,
          "MIA retrained " + fmt("%.3f", mia_retrained) + ", original " +
              fmt("%.3f", mia_original) + "; W_dist(self) " + fmt("%g", self) + "; min KL over " +
              std::to_string(g_kl_values.size()) + " values " + fmt("%.3e", min_kl),
          seconds_since(t0));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  influence_fidelity();
  derivatives();
  Desk d{desk(1), {}};
  d.ex = cli::prepare_experiment(d.cfg);
  ga_collapse(d);
  npo_limit(d);
  divergence_bounds();
  class_wise();
  ablations();
  markov_case_study();
  metric_sanity(d);
  std::printf("%d criteria failed; total %.1f s\n", g_failures, seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
