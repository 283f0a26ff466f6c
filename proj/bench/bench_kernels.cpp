// OpenMP kernels against their serial reference versions. Thread count
// follows CVKIT_THREADS / OMP_NUM_THREADS.
#include <benchmark/benchmark.h>

#include <map>

#include "cvkit/homodyne.hpp"
#include "cvkit/maxlik.hpp"
#include "cvkit/stellar.hpp"
#include "cvkit/tsne.hpp"

using namespace cvkit;

namespace {

const fock::TwoModeState& sample_state() {
  static const auto s = stellar::synthesize_random_state({}, fock::FockCutoff(fock::kDefaultNMax), 17).state;
  return s;
}

void BM_pattern_parallel(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(homodyne::pattern_from_pdf(sample_state()));
}
void BM_pattern_reference(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(homodyne::reference::pattern_from_pdf(sample_state()));
}

struct TsneInputs {
  RMatrix p;
  RMatrix y;
};

const TsneInputs& tsne_inputs(int n) {
  static std::map<int, TsneInputs> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    Rng rng(3);
    std::normal_distribution<double> normal;
    RMatrix x(n, 16), y(n, 2);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = normal(rng);
    for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = normal(rng);
    it = cache.emplace(n, TsneInputs{tsne::calibrate_affinities(x, 20.0), y}).first;
  }
  return it->second;
}

void BM_kl_gradient_parallel(benchmark::State& st) {
  const auto& in = tsne_inputs(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(tsne::kl_gradient(in.p, in.y));
}
void BM_kl_gradient_reference(benchmark::State& st) {
  const auto& in = tsne_inputs(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(tsne::reference::kl_gradient(in.p, in.y));
}

struct MaxlikInputs {
  maxlik::BinPovm povm;
  maxlik::FrequencyTable table;
  CMatrix rho;
};

const MaxlikInputs& maxlik_inputs() {
  static const MaxlikInputs in = [] {
    const fock::FockCutoff cut(6);
    const auto s = stellar::synthesize_random_state({}, cut, 5).state;
    const auto table = maxlik::frequencies(homodyne::sample_homodyne(s, 20000, 1));
    return MaxlikInputs{maxlik::BinPovm(cut), table,
                        CMatrix::Identity(cut.joint_dim(), cut.joint_dim()) / cut.joint_dim()};
  }();
  return in;
}

void BM_r_operator_parallel(benchmark::State& st) {
  const auto& in = maxlik_inputs();
  for (auto _ : st) benchmark::DoNotOptimize(maxlik::r_operator(in.povm, in.table, in.rho));
}
void BM_r_operator_reference(benchmark::State& st) {
  const auto& in = maxlik_inputs();
  for (auto _ : st) benchmark::DoNotOptimize(maxlik::reference::r_operator(in.povm, in.table, in.rho));
}

}  // namespace

BENCHMARK(BM_pattern_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_pattern_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kl_gradient_parallel)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kl_gradient_reference)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
// The reference builds every d^2 x d^2 effect, so it runs at a small cutoff.
BENCHMARK(BM_r_operator_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_r_operator_reference)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
