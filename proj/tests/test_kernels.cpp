#include <cmath>

#include "doctest.h"
#include "thinfb/kernels.hpp"
#include "thinfb/sampling.hpp"

using namespace thinfb;

namespace {

// Unit-weight Laplacian on an nx*ny*nz box with Dirichlet boundary nodes.
FaceOperator box_laplacian(int nx, int ny, int nz, int axes) {
  FaceOperator A({nx, ny, nz}, axes);
  for (std::size_t k = 0; k < A.size(); ++k) {
    const auto c = A.unravel(k);
    bool interior = true;
    for (int a = 0; a < axes; ++a) {
      if (c[a] + 1 < A.dims[a]) A.w[a][k] = 1.0;
      if (c[a] == 0 || c[a] + 1 == A.dims[a]) interior = false;
    }
    A.free[k] = interior;
  }
  return A;
}

}  // namespace

TEST_CASE("serial and OpenMP matvec are bit-identical") {
  FaceOperator A = box_laplacian(17, 13, 11, 3);
  Rng rng(7);
  for (auto& wa : A.w)
    for (double& v : wa) v *= rng.uniform(0.5, 2.0);
  for (double& d : A.diag_extra) d = rng.uniform(0.0, 0.1);
  std::vector<double> x(A.size()), y1, y2;
  for (double& v : x) v = rng.uniform(-1, 1);
  kernels::apply_serial(A, x, y1);
  kernels::apply_omp(A, x, y2);
  CHECK(y1 == y2);
}

TEST_CASE("serial and OpenMP dot are bit-identical and close to the naive sum") {
  Rng rng(9);
  std::vector<double> a(100003), b(100003);
  for (std::size_t k = 0; k < a.size(); ++k) {
    a[k] = rng.uniform(-1, 1);
    b[k] = rng.uniform(-1, 1);
  }
  const double s1 = kernels::dot_serial(a, b), s2 = kernels::dot_omp(a, b);
  CHECK(s1 == s2);
  long double naive = 0.0L;
  for (std::size_t k = 0; k < a.size(); ++k) naive += static_cast<long double>(a[k]) * b[k];
  CHECK(std::abs(s1 - static_cast<double>(naive)) < 1e-10);
}

TEST_CASE("min/max scans agree between serial and OpenMP") {
  auto f = [](std::size_t k) { return std::sin(0.001 * static_cast<double>(k)) + (k % 7 == 0 ? NAN : 0.0); };
  CHECK(kernels::min_serial(50000, f) == kernels::min_omp(50000, f));
  CHECK(kernels::max_serial(50000, f) == kernels::max_omp(50000, f));
}

TEST_CASE("PCG reproduces a discrete-harmonic linear field with monotone energy") {
  const int n = 21;
  FaceOperator A = box_laplacian(n, n, 1, 2);
  // Dirichlet data g = 2 + 3i - j on the boundary: discrete harmonic, so the solution is exact.
  std::vector<double> g(A.size(), 0.0), b, x(A.size(), 0.0);
  for (std::size_t k = 0; k < A.size(); ++k) {
    const auto c = A.unravel(k);
    if (!A.free[k]) g[k] = 2.0 + 3.0 * c[0] - c[1];
  }
  kernels::apply_serial(A, g, b);
  for (double& v : b) v = -v;
  CgOptions opt;
  opt.tol = 1e-13;
  opt.record_energy = true;
  const CgResult res = pcg(A, b, x, opt);
  CHECK(res.converged);
  for (std::size_t k = 0; k < A.size(); ++k) {
    const auto c = A.unravel(k);
    CHECK(x[k] + g[k] == doctest::Approx(2.0 + 3.0 * c[0] - c[1]).epsilon(1e-10));
  }
  for (std::size_t i = 1; i < res.energy.size(); ++i) CHECK(res.energy[i] <= res.energy[i - 1] + 1e-12 * std::abs(res.energy.back()));

  std::vector<double> xs(A.size(), 0.0);
  opt.parallel = false;
  opt.record_energy = false;
  const CgResult rs = pcg(A, b, xs, opt);
  CHECK(rs.iterations == res.iterations);
  CHECK(xs == x);
}

TEST_CASE("PCG with zero right-hand side returns zero") {
  FaceOperator A = box_laplacian(9, 9, 9, 3);
  std::vector<double> b(A.size(), 0.0), x(A.size(), 1.0);
  const CgResult res = pcg(A, b, x);
  CHECK(res.converged);
  for (double v : x) CHECK(v == 0.0);
}
