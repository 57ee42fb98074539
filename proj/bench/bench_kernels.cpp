// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include "thinfb/flatness_harness.hpp"
#include "thinfb/geometry.hpp"
#include "thinfb/kernels.hpp"
#include "thinfb/sampling.hpp"

using namespace thinfb;

namespace {

FaceOperator box_laplacian(int m) {
  FaceOperator A({m, m, m}, 3);
  for (std::size_t k = 0; k < A.size(); ++k) {
    const auto c = A.unravel(k);
    bool interior = true;
    for (int a = 0; a < 3; ++a) {
      if (c[a] + 1 < m) A.w[a][k] = 1.0;
      if (c[a] == 0 || c[a] + 1 == m) interior = false;
    }
    A.free[k] = interior;
  }
  return A;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <bool Parallel>
void BM_apply(benchmark::State& st) {
  const FaceOperator A = box_laplacian(static_cast<int>(st.range(0)));
  const std::vector<double> x = random_vector(A.size(), 1);
  std::vector<double> y(A.size());
  for (auto _ : st) {
    Parallel ? kernels::apply_omp(A, x, y) : kernels::apply_serial(A, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(A.size()));
}

template <bool Parallel>
void BM_dot(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const std::vector<double> a = random_vector(n, 2), b = random_vector(n, 3);
  for (auto _ : st) benchmark::DoNotOptimize(Parallel ? kernels::dot_omp(a, b) : kernels::dot_serial(a, b));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(n));
}

template <bool Parallel>
void BM_min(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const std::vector<double> a = random_vector(n, 4);
  auto f = [&](std::size_t k) { return a[k]; };
  for (auto _ : st) benchmark::DoNotOptimize(Parallel ? kernels::min_omp(n, f) : kernels::min_serial(n, f));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(n));
}

template <bool Parallel>
void BM_cg(benchmark::State& st) {
  const FaceOperator A = box_laplacian(static_cast<int>(st.range(0)));
  std::vector<double> b(A.size(), 0.0);
  for (std::size_t k = 0; k < A.size(); ++k) b[k] = A.free[k] ? 1.0 : 0.0;
  CgOptions opt;
  opt.parallel = Parallel;
  for (auto _ : st) {
    std::vector<double> x(A.size(), 0.0);
    benchmark::DoNotOptimize(pcg(A, b, x, opt).iterations);
  }
}

template <bool Parallel>
void BM_flatness_at_scale(benchmark::State& st) {
  const Lattice lat = Lattice::box(2, 1.0 / static_cast<double>(st.range(0)), 0.5);
  const GridField g = GridField::sample(lat, [](const PointXZ& X) { return eval_U(0.2 * X.xprime[0] + 0.98 * X.xn, X.z); });
  const PointXZ origin{{0.0}, 0.0, 0.0};
  for (auto _ : st) benchmark::DoNotOptimize(flatness_at_scale(g, 0.25, origin, 0.5, Parallel));
}

}  // namespace

BENCHMARK(BM_apply<false>)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(BM_apply<true>)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(BM_dot<false>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_dot<true>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_min<false>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_min<true>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_cg<false>)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_cg<true>)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_flatness_at_scale<false>)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_flatness_at_scale<true>)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
