#pragma once

// Data-parallel kernels. Each has a serial reference and an OpenMP version that
// must return bit-identical results (reductions use a fixed block partition).

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <vector>

namespace thinfb {

/// Symmetric nearest-neighbour operator on a box of nodes (row-major, up to 3 axes):
///   (A x)_i = d_i x_i + sum_{faces (i,j)} w_ij (x_i - x_j)   for free nodes i,
/// and 0 on fixed nodes. Face weights w[a][i] couple i and i + e_a.
struct FaceOperator {
  std::array<int, 3> dims{1, 1, 1};
  std::array<std::size_t, 3> stride{0, 0, 0};
  std::array<std::vector<double>, 3> w;
  std::vector<double> diag_extra;
  std::vector<unsigned char> free;

  FaceOperator() = default;
  FaceOperator(std::array<int, 3> dims_, int axes);
  std::size_t size() const { return free.size(); }
  int axes() const { return axes_; }
  std::array<int, 3> unravel(std::size_t k) const;
  /// Jacobi diagonal of free rows (1 on fixed rows).
  std::vector<double> diagonal() const;

 private:
  int axes_ = 1;
};

namespace kernels {

/// Block size of deterministic reductions.
inline constexpr std::size_t kBlock = 4096;

void apply_serial(const FaceOperator& A, const std::vector<double>& x, std::vector<double>& y);
void apply_omp(const FaceOperator& A, const std::vector<double>& x, std::vector<double>& y);

double dot_serial(const std::vector<double>& a, const std::vector<double>& b);
double dot_omp(const std::vector<double>& a, const std::vector<double>& b);

/// Blocked min/max of f(k) over k in [0, count); skips k where f returns NaN.
template <class F>
double min_serial(std::size_t count, F&& f) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < count; ++k) {
    const double v = f(k);
    if (v == v) m = std::min(m, v);
  }
  return m;
}

template <class F>
double min_omp(std::size_t count, F&& f) {
  const long long nc = static_cast<long long>(count);
  double m = std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(min : m) schedule(static)
  for (long long k = 0; k < nc; ++k) {
    const double v = f(static_cast<std::size_t>(k));
    if (v == v) m = std::min(m, v);
  }
  return m;
}

template <class F>
double max_serial(std::size_t count, F&& f) {
  return -min_serial(count, [&](std::size_t k) { return -f(k); });
}

template <class F>
double max_omp(std::size_t count, F&& f) {
  return -min_omp(count, [&](std::size_t k) { return -f(k); });
}

}  // namespace kernels

struct CgOptions {
  double tol = 1e-10;  // on ||r|| / ||b||
  int max_iter = 20000;
  bool parallel = true;
  bool record_energy = false;
};

struct CgResult {
  int iterations = 0;
  double residual = 0.0;  // relative
  bool converged = false;
  std::vector<double> energy;  // 0.5 x'Ax - b'x per iteration when recorded
};

/// Jacobi-preconditioned conjugate gradient for A x = b on free rows.
/// x holds the initial guess and receives the solution; fixed entries stay 0.
CgResult pcg(const FaceOperator& A, const std::vector<double>& b, std::vector<double>& x,
             const CgOptions& opt = {});

}  // namespace thinfb
