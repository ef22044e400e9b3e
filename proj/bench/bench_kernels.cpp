// Serial reference vs OpenMP/SIMD kernels on emulator-sized layers.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "eidgm/emulator.hpp"
#include "eidgm/kernels.hpp"
#include "eidgm/odes.hpp"

namespace {

using eidgm::kernels::AffineLayout;
using eidgm::kernels::Backend;
using eidgm::kernels::GroupIndex;
using eidgm::kernels::kernel_set;

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(g);
  return v;
}

Backend backend_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Backend::Serial : Backend::Parallel;
}

void set_labels(benchmark::State& state, double flops_per_iter) {
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
  state.counters["GFlop/s"] = benchmark::Counter(flops_per_iter * static_cast<double>(state.iterations()) * 1e-9,
                                                 benchmark::Counter::kIsRate);
}

void BM_Affine(benchmark::State& state) {
  const auto& k = kernel_set(backend_of(state));
  const std::size_t batch = static_cast<std::size_t>(state.range(1));
  const std::size_t width = static_cast<std::size_t>(state.range(2));
  const AffineLayout layout{0, width, width, true};
  const auto x = random_vec(batch * width, 1);
  const auto theta = random_vec(layout.span(), 2);
  std::vector<double> y(batch * width);
  for (auto _ : state) {
    k.affine(x, batch, theta, layout, y);
    benchmark::DoNotOptimize(y.data());
  }
  set_labels(state, 2.0 * batch * width * width);
}

void BM_AffineBackward(benchmark::State& state) {
  const auto& k = kernel_set(backend_of(state));
  const std::size_t batch = static_cast<std::size_t>(state.range(1));
  const std::size_t width = static_cast<std::size_t>(state.range(2));
  const AffineLayout layout{0, width, width, true};
  const auto x = random_vec(batch * width, 1);
  const auto dy = random_vec(batch * width, 3);
  const auto theta = random_vec(layout.span(), 2);
  std::vector<double> dx(batch * width), dtheta(layout.span());
  for (auto _ : state) {
    k.affine_backward_input(dy, batch, theta, layout, dx);
    k.affine_backward_theta(x, dy, batch, layout, dtheta);
    benchmark::DoNotOptimize(dx.data());
    benchmark::DoNotOptimize(dtheta.data());
  }
  set_labels(state, 4.0 * batch * width * width);
}

// One main network per parameter: `groups` weight rows, batch / groups rows each.
void BM_GroupedAffine(benchmark::State& state) {
  const auto& k = kernel_set(backend_of(state));
  const std::size_t batch = static_cast<std::size_t>(state.range(1));
  const std::size_t width = static_cast<std::size_t>(state.range(2));
  const std::size_t groups = 50;
  const AffineLayout layout{0, width, width, true};
  std::vector<std::uint32_t> label(batch);
  for (std::size_t b = 0; b < batch; ++b) label[b] = static_cast<std::uint32_t>(b % groups);
  const auto index = GroupIndex::build(label, groups);
  const auto x = random_vec(batch * width, 1);
  const auto theta = random_vec(groups * layout.span(), 2);
  std::vector<double> y(batch * width);
  for (auto _ : state) {
    k.grouped_affine(x, batch, theta, layout.span(), *index, layout, y);
    benchmark::DoNotOptimize(y.data());
  }
  set_labels(state, 2.0 * batch * width * width);
}

void BM_Tanh(benchmark::State& state) {
  const auto& k = kernel_set(backend_of(state));
  const std::size_t n = static_cast<std::size_t>(state.range(1));
  const auto x = random_vec(n, 4);
  std::vector<double> y(n);
  for (auto _ : state) {
    k.tanh(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

// One parameter vector -> 100-point trajectory.
void BM_EmulatorTrajectory(benchmark::State& state) {
  const eidgm::ParamRange range{{0.5}, {3.5}};
  const auto em = eidgm::emulator::make_emulator(eidgm::emulator::Architecture{}, range, 1, 0.0,
                                                 1.0, 3);
  const auto times = eidgm::linspace(0.0, 1.0, 100);
  const eidgm::Matrix p(1, 1, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(em->predict(p, times).data.data());
}

void BM_IntegrateTrajectory(benchmark::State& state) {
  const auto sys = eidgm::odes::exponential();
  const auto times = eidgm::linspace(0.0, 1.0, 100);
  const double y0[] = {1.0}, p[] = {2.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        eidgm::odes::integrate(sys, y0, p, times, 1e-9, 1e-11).states.data.data());
  }
}

void layer_args(benchmark::internal::Benchmark* b) {
  for (int backend : {0, 1}) {
    for (int batch : {60, 1000, 5000}) {
      for (int width : {32, 64, 128}) b->Args({backend, batch, width});
    }
  }
}

BENCHMARK(BM_Affine)->Apply(layer_args);
BENCHMARK(BM_AffineBackward)->Apply(layer_args);
BENCHMARK(BM_GroupedAffine)->Apply(layer_args);
BENCHMARK(BM_EmulatorTrajectory);
BENCHMARK(BM_IntegrateTrajectory);
BENCHMARK(BM_Tanh)->ArgsProduct({{0, 1}, {4096, 320000}});

}  // namespace

BENCHMARK_MAIN();
