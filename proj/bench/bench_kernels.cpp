#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "facetflow/kernels.hpp"
#include "facetflow/resolvent.hpp"

namespace k = facetflow::kernels;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

k::Shape shape(const benchmark::State& st) { return {2, int(st.range(0))}; }

template <bool Omp>
void BM_gradient(benchmark::State& st) {
  const k::Shape s = shape(st);
  const auto u = noise(s.size(), 1);
  std::vector<double> gx(s.size()), gy(s.size());
  for (auto _ : st) {
    if constexpr (Omp) k::omp::gradient(s, u, s.n, gx, gy);
    else k::serial::gradient(s, u, s.n, gx, gy);
    benchmark::DoNotOptimize(gx.data());
  }
  st.SetItemsProcessed(st.iterations() * s.size());
}

template <bool Omp>
void BM_divergence(benchmark::State& st) {
  const k::Shape s = shape(st);
  const auto zx = noise(s.size(), 2), zy = noise(s.size(), 3);
  std::vector<double> out(s.size());
  for (auto _ : st) {
    if constexpr (Omp) k::omp::divergence(s, zx, zy, s.n, out);
    else k::serial::divergence(s, zx, zy, s.n, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * s.size());
}

template <bool Omp>
void BM_prox_step(benchmark::State& st) {
  const k::Shape s = shape(st);
  auto v = noise(s.size(), 4), vbar = v;
  const auto divz = noise(s.size(), 5), psi = noise(s.size(), 6);
  for (auto _ : st) {
    if constexpr (Omp) k::omp::prox_step(v, vbar, divz, psi, 0.1, 100.0, 1.0);
    else k::serial::prox_step(v, vbar, divz, psi, 0.1, 100.0, 1.0);
    benchmark::DoNotOptimize(v.data());
  }
  st.SetItemsProcessed(st.iterations() * s.size());
}

template <bool Omp>
void BM_squared_edt(benchmark::State& st) {
  const k::Shape s = shape(st);
  const auto u = noise(s.size(), 7);
  std::vector<std::uint8_t> mask(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) mask[i] = u[i] > 0.9;
  std::vector<double> out(s.size());
  for (auto _ : st) {
    if constexpr (Omp) k::omp::squared_edt(s, mask, out);
    else k::serial::squared_edt(s, mask, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * s.size());
}

template <bool Omp>
void BM_sum(benchmark::State& st) {
  const auto v = noise(std::size_t(st.range(0)) * st.range(0), 8);
  for (auto _ : st) {
    double r;
    if constexpr (Omp) r = k::omp::sum(v);
    else r = k::serial::sum(v);
    benchmark::DoNotOptimize(r);
  }
  st.SetItemsProcessed(st.iterations() * v.size());
}

// End to end: one singular resolvent solve (OpenMP kernels inside).
void BM_resolvent_2d(benchmark::State& st) {
  using namespace facetflow;
  const Grid g(2, int(st.range(0)));
  const GridFunction psi = sample(g, [](Vec2 x) {
    return 0.3 * std::sin(2 * M_PI * x.x) + 0.2 * std::cos(2 * M_PI * (x.x + 2 * x.y));
  });
  const auto w = make_euclidean(2);
  for (auto _ : st) {
    const ResolventReport r = resolve_singular(psi, 1e-3, *w);
    benchmark::DoNotOptimize(r.psi_a.values().data());
    st.counters["iterations"] = r.iterations;
  }
}

}  // namespace

#define FACETFLOW_BENCH_PAIR(fn)                                         \
  BENCHMARK(fn<false>)->Name(#fn "/serial")->Arg(128)->Arg(512);        \
  BENCHMARK(fn<true>)->Name(#fn "/omp")->Arg(128)->Arg(512)

FACETFLOW_BENCH_PAIR(BM_gradient);
FACETFLOW_BENCH_PAIR(BM_divergence);
FACETFLOW_BENCH_PAIR(BM_prox_step);
FACETFLOW_BENCH_PAIR(BM_squared_edt);
FACETFLOW_BENCH_PAIR(BM_sum);
BENCHMARK(BM_resolvent_2d)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
