// Benchmarks for the hot paths: log-domain reductions, the E-step, the
// weighted logistic M-step, and the clustering used for starting values.

#include <benchmark/benchmark.h>

#include "multilc/data.hpp"
#include "multilc/em.hpp"
#include "multilc/model.hpp"
#include "multilc/numerics.hpp"
#include "multilc/simulate.hpp"

#include <vector>

namespace {

using namespace multilc;

// A well-separated 3-class / 2-group-class generating model over 8 binary
// items; the same shape the tests use, sized for benchmarking.
TrueModel bench_truth() {
  TrueModel truth;
  truth.t = 3;
  truth.m = 2;
  const int h_count = 8;
  for (int h = 0; h < h_count; ++h) {
    ItemSchema item;
    item.name = "y" + std::to_string(h + 1);
    item.categories = {"0", "1"};
    truth.items.push_back(item);
    Matrix phi(3, 2);
    const double hi = 0.85, lo = 0.15;
    const double p1 = hi;
    const double p2 = h < h_count / 2 ? hi : lo;
    const double p3 = lo;
    phi << 1 - p1, p1, 1 - p2, p2, 1 - p3, p3;
    truth.phi.push_back(phi);
  }
  truth.alpha = Matrix(1, 1);
  truth.alpha << 0.4;
  Matrix g1(2, 1), g2(2, 1);
  g1 << 0.5, -0.6;
  g2 << -0.7, 0.3;
  truth.gamma = {g1, g2};
  return truth;
}

const IngestResult& bench_data() {
  static const IngestResult ingested = [] {
    const TrueModel truth = bench_truth();
    const SimResult sim = simulate_dataset(truth, 50, {100}, 7);
    IngestSpec spec;
    for (const auto& item : truth.items) spec.items.push_back(item.name);
    spec.group = truth.group_column;
    return ingest(sim.data, spec);
  }();
  return ingested;
}

StructuralParams bench_params() {
  StructuralParams sp;
  sp.n_class_low = 3;
  sp.n_class_high = 2;
  sp.omega = Vector(2);
  sp.omega << 0.6, 0.4;
  sp.pi = Matrix(2, 3);
  sp.pi << 0.5, 0.3, 0.2, 0.2, 0.3, 0.5;
  return sp;
}

void BM_LogSumExp(benchmark::State& state) {
  const Index n = state.range(0);
  Vector x(n);
  Rng rng(3);
  for (Index i = 0; i < n; ++i) x[i] = -500.0 + 20.0 * rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_sum_exp(x));
  }
}
BENCHMARK(BM_LogSumExp)->Arg(8)->Arg(64)->Arg(1024);

void BM_ItemLogDensity(benchmark::State& state) {
  const Dataset& data = bench_data().measurement;
  const TrueModel truth = bench_truth();
  for (auto _ : state) {
    benchmark::DoNotOptimize(item_log_density(data.y, truth.phi));
  }
}
BENCHMARK(BM_ItemLogDensity);

void BM_ComputePosteriors(benchmark::State& state) {
  const Dataset& data = bench_data().measurement;
  const TrueModel truth = bench_truth();
  const StructuralParams sp = bench_params();
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_posteriors(data, truth.phi, sp));
  }
}
BENCHMARK(BM_ComputePosteriors);

void BM_EmTenIterations(benchmark::State& state) {
  const Dataset& data = bench_data().measurement;
  const TrueModel truth = bench_truth();
  const StructuralParams sp = bench_params();
  EmControl ctrl;
  ctrl.max_iter = 10;
  ctrl.tol = 0.0;  // run all ten iterations
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        em_multilevel_measurement(data, truth.phi, sp.omega, sp.pi, ctrl));
  }
}
BENCHMARK(BM_EmTenIterations);

void BM_LogisticMstep(benchmark::State& state) {
  const Index n = 5000;
  Rng rng(11);
  Matrix z(n, 3);
  Matrix w(n, 3);
  for (Index i = 0; i < n; ++i) {
    z(i, 0) = 1.0;
    z(i, 1) = rng.normal();
    z(i, 2) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    Vector raw(3);
    for (int t = 0; t < 3; ++t) raw[t] = rng.uniform01() + 1e-3;
    w.row(i) = (raw / raw.sum()).transpose();
  }
  const Matrix coeffs = Matrix::Zero(2, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mstep_logistic(z, w, coeffs, 1));
  }
}
BENCHMARK(BM_LogisticMstep);

void BM_Kmeans(benchmark::State& state) {
  const Index n = 2000;
  Rng rng(5);
  Matrix x(n, 6);
  for (Index i = 0; i < n; ++i) {
    const double shift = (i % 3) * 4.0;
    for (Index j = 0; j < 6; ++j) x(i, j) = shift + rng.normal();
  }
  for (auto _ : state) {
    Rng local(17);
    benchmark::DoNotOptimize(kmeans(x, 3, local, 3, 50));
  }
}
BENCHMARK(BM_Kmeans);

}  // namespace

BENCHMARK_MAIN();
