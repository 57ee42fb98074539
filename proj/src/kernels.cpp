#include "thinfb/kernels.hpp"

#include <cmath>

namespace thinfb {

FaceOperator::FaceOperator(std::array<int, 3> dims_, int axes) : dims(dims_), axes_(axes) {
  for (int a = axes; a < 3; ++a) dims[a] = 1;
  stride = {static_cast<std::size_t>(dims[1]) * dims[2], static_cast<std::size_t>(dims[2]), 1};
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  for (int a = 0; a < axes; ++a) w[a].assign(n, 0.0);
  diag_extra.assign(n, 0.0);
  free.assign(n, 0);
}

std::array<int, 3> FaceOperator::unravel(std::size_t k) const {
  return {static_cast<int>(k / stride[0]), static_cast<int>((k / stride[1]) % dims[1]),
          static_cast<int>(k % dims[2])};
}

std::vector<double> FaceOperator::diagonal() const {
  std::vector<double> d(size(), 1.0);
  for (std::size_t k = 0; k < size(); ++k) {
    if (!free[k]) continue;
    const auto c = unravel(k);
    double s = diag_extra[k];
    for (int a = 0; a < axes_; ++a) {
      if (c[a] + 1 < dims[a]) s += w[a][k];
      if (c[a] > 0) s += w[a][k - stride[a]];
    }
    d[k] = s > 0.0 ? s : 1.0;
  }
  return d;
}

namespace {

inline double row(const FaceOperator& A, const std::vector<double>& x, std::size_t k, int i, int j, int l) {
  const double xk = x[k];
  double s = A.diag_extra[k] * xk;
  const int c[3] = {i, j, l};
  for (int a = 0; a < A.axes(); ++a) {
    const std::size_t st = A.stride[a];
    if (c[a] + 1 < A.dims[a]) s += A.w[a][k] * (xk - x[k + st]);
    if (c[a] > 0) s += A.w[a][k - st] * (xk - x[k - st]);
  }
  return s;
}

inline void apply_slab(const FaceOperator& A, const std::vector<double>& x, std::vector<double>& y, int i) {
  for (int j = 0; j < A.dims[1]; ++j) {
    std::size_t k = i * A.stride[0] + j * A.stride[1];
    for (int l = 0; l < A.dims[2]; ++l, ++k) y[k] = A.free[k] ? row(A, x, k, i, j, l) : 0.0;
  }
}

inline double block_dot(const std::vector<double>& a, const std::vector<double>& b, std::size_t blk) {
  const std::size_t lo = blk * kernels::kBlock;
  const std::size_t hi = std::min(a.size(), lo + kernels::kBlock);
  double s = 0.0;
  for (std::size_t k = lo; k < hi; ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

namespace kernels {

void apply_serial(const FaceOperator& A, const std::vector<double>& x, std::vector<double>& y) {
  y.resize(x.size());
  for (int i = 0; i < A.dims[0]; ++i) apply_slab(A, x, y, i);
}

void apply_omp(const FaceOperator& A, const std::vector<double>& x, std::vector<double>& y) {
  y.resize(x.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < A.dims[0]; ++i) apply_slab(A, x, y, i);
}

double dot_serial(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t nb = (a.size() + kBlock - 1) / kBlock;
  double s = 0.0;
  for (std::size_t blk = 0; blk < nb; ++blk) s += block_dot(a, b, blk);
  return s;
}

double dot_omp(const std::vector<double>& a, const std::vector<double>& b) {
  const long long nb = static_cast<long long>((a.size() + kBlock - 1) / kBlock);
  std::vector<double> part(static_cast<std::size_t>(nb));
#pragma omp parallel for schedule(static)
  for (long long blk = 0; blk < nb; ++blk) part[blk] = block_dot(a, b, static_cast<std::size_t>(blk));
  double s = 0.0;
  for (double p : part) s += p;
  return s;
}

}  // namespace kernels

CgResult pcg(const FaceOperator& A, const std::vector<double>& b, std::vector<double>& x, const CgOptions& opt) {
  const std::size_t n = A.size();
  auto apply = opt.parallel ? kernels::apply_omp : kernels::apply_serial;
  auto dot = opt.parallel ? kernels::dot_omp : kernels::dot_serial;
  const long long nl = static_cast<long long>(n);

  CgResult res;
  x.resize(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    if (!A.free[k]) x[k] = 0.0;
  const std::vector<double> dinv = [&] {
    std::vector<double> d = A.diagonal();
    for (double& v : d) v = 1.0 / v;
    return d;
  }();

  std::vector<double> r(n), z(n), p(n), Ap(n);
  apply(A, x, Ap);
#pragma omp parallel for schedule(static) if (opt.parallel)
  for (long long k = 0; k < nl; ++k) {
    r[k] = A.free[k] ? b[k] - Ap[k] : 0.0;
    z[k] = dinv[k] * r[k];
    p[k] = z[k];
  }
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }
  // 0.5 x'Ax - b'x evaluated with a fresh product, not the recursively updated residual
  std::vector<double> Ax;
  auto energy = [&] {
    apply(A, x, Ax);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += x[k] * (0.5 * Ax[k] - b[k]);
    return s;
  };
  if (opt.record_energy) res.energy.push_back(energy());

  double rz = dot(r, z);
  res.residual = std::sqrt(dot(r, r)) / bnorm;
  if (res.residual <= opt.tol) {
    res.converged = true;
    return res;
  }
  for (int it = 1; it <= opt.max_iter; ++it) {
    apply(A, p, Ap);
    const double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rz / pAp;
#pragma omp parallel for schedule(static) if (opt.parallel)
    for (long long k = 0; k < nl; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * Ap[k];
      z[k] = dinv[k] * r[k];
    }
    res.iterations = it;
    res.residual = std::sqrt(dot(r, r)) / bnorm;
    if (opt.record_energy) res.energy.push_back(energy());
    if (res.residual <= opt.tol) {
      res.converged = true;
      break;
    }
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
#pragma omp parallel for schedule(static) if (opt.parallel)
    for (long long k = 0; k < nl; ++k) p[k] = z[k] + beta * p[k];
  }
  return res;
}

}  // namespace thinfb
