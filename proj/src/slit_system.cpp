#include "thinfb/slit_system.hpp"

#include <string>

#include "thinfb/errors.hpp"

namespace thinfb {

namespace {

std::array<int, 3> half_dims(const Lattice& lat) {
  std::array<int, 3> d{1, 1, 1};
  for (int a = 0; a < lat.z_axis(); ++a) d[a] = lat.extent(a);
  d[lat.z_axis()] = lat.half(lat.z_axis()) + 1;
  return d;
}

}  // namespace

HalfSystem::HalfSystem(const Lattice& lat, const std::function<double(int, const Index&)>& face_weight,
                       const std::function<bool(const Index&)>& is_fixed,
                       const std::function<double(const Index&)>& diag_extra)
    : lat_(lat), A_(half_dims(lat), lat.axes()) {
  const int za = lat_.z_axis();
  for (std::size_t k = 0; k < A_.size(); ++k) {
    const Index ijk = index(k);
    const bool in_plane = ijk[za] == 0;
    A_.free[k] = !(lat_.on_boundary(ijk) || is_fixed(ijk));
    if (diag_extra) A_.diag_extra[k] = (in_plane ? 0.5 : 1.0) * diag_extra(ijk);
    const auto c = A_.unravel(k);
    for (int a = 0; a < lat_.axes(); ++a) {
      if (c[a] + 1 >= A_.dims[a]) continue;
      A_.w[a][k] = (in_plane && a != za ? 0.5 : 1.0) * face_weight(a, ijk);
    }
  }
}

Index HalfSystem::index(std::size_t k) const {
  const auto c = A_.unravel(k);
  Index ijk{0, 0, 0};
  for (int a = 0; a < lat_.z_axis(); ++a) ijk[a] = c[a] - lat_.half(a);
  ijk[lat_.z_axis()] = c[lat_.z_axis()];
  return ijk;
}

GridField HalfSystem::solve(const GridField& fixed, const std::vector<double>* source, const CgOptions& opt,
                            const GridField* warm, CgResult* info) const {
  const std::size_t m = A_.size();
  const int za = lat_.z_axis();
  std::vector<double> b(m, 0.0), x(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    if (!A_.free[k]) continue;
    const auto c = A_.unravel(k);
    const std::size_t fk = full(k);
    if (source) b[k] = (c[za] == 0 ? 0.5 : 1.0) * (*source)[fk];
    for (int a = 0; a < lat_.axes(); ++a) {
      const std::size_t st = A_.stride[a];
      if (c[a] + 1 < A_.dims[a] && !A_.free[k + st]) b[k] += A_.w[a][k] * fixed[full(k + st)];
      if (c[a] > 0 && !A_.free[k - st]) b[k] += A_.w[a][k - st] * fixed[full(k - st)];
    }
    if (warm) x[k] = (*warm)[fk];
  }
  const CgResult res = pcg(A_, b, x, opt);
  if (info) *info = res;
  if (!res.converged)
    throw ConvergenceError("HalfSystem::solve: residual " + std::to_string(res.residual) + " after " +
                           std::to_string(res.iterations) + " iterations");

  GridField out(lat_, true);
  for (std::size_t k = 0; k < m; ++k) out[full(k)] = A_.free[k] ? x[k] : fixed[full(k)];
  out.mirror_z();
  return out;
}

}  // namespace thinfb
