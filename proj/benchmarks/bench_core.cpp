#include "unlearn_lab/influence.hpp"
#include "unlearn_lab/model.hpp"
#include "unlearn_lab/synth_data.hpp"
#include "unlearn_lab/unlearn.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace unlearn_lab;

namespace {

struct Desk {
  LabeledFeatures train;
  LabeledFeatures forget;
  ClassifierState model;
};

// Class-wise split of the 3-class desk problem at feature width `dim`.
const Desk& desk(int dim) {
  static std::map<int, Desk> cache;
  auto it = cache.find(dim);
  if (it != cache.end()) return it->second;
  const auto ds = gen_gaussian_classes(3, 8, 200, 0.7, 1);
  const auto split = make_split(ds, SplitParams{});
  const Matrix z = FeatureExtractor::random_relu(8, dim, 101).extract_all(ds.features);
  Desk d;
  d.train = select_rows(z, ds.labels, split.train());
  d.forget = select_rows(z, ds.labels, split.forget);
  TrainConfig cfg;
  cfg.solver = Solver::newton;
  d.model = train_classifier(d.train, 3, cfg).state;
  return cache.emplace(dim, std::move(d)).first->second;
}

void BM_HessianAssembly(benchmark::State& state) {
  const Desk& d = desk(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(hessian_classifier(d.model, d.train.features, 1e-3));
  }
}
BENCHMARK(BM_HessianAssembly)->Arg(16)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_InfluenceReport(benchmark::State& state) {
  const Desk& d = desk(static_cast<int>(state.range(0)));
  const InfluenceOptions options{Damping{}, 95.0, 1.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_influence_report(d.model, d.forget, options));
  }
}
BENCHMARK(BM_InfluenceReport)->Arg(16)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ImuEpoch(benchmark::State& state) {
  const Desk& d = desk(128);
  UnlearnConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 1.0;
  cfg.update_frequency = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_imu(d.model, d.forget, cfg));
  }
}
BENCHMARK(BM_ImuEpoch)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_GaEpoch(benchmark::State& state) {
  const Desk& d = desk(128);
  UnlearnConfig cfg;
  cfg.method = Method::ga;
  cfg.epochs = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_ga(d.model, d.forget, cfg));
  }
}
BENCHMARK(BM_GaEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
