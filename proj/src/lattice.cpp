#include "thinfb/lattice.hpp"

#include <cmath>
#include <stdexcept>

#include "thinfb/errors.hpp"

namespace thinfb {

Lattice::Lattice(int n, double h, std::array<int, 3> half) : n_(n), h_(h), half_(half) {
  if (n < 1 || n > 2) throw std::invalid_argument("Lattice: n must be 1 or 2");
  if (!(h > 0.0)) throw std::invalid_argument("Lattice: h must be positive");
  for (int a = axes(); a < 3; ++a) half_[a] = 0;
  std::size_t s = 1;
  for (int a = axes() - 1; a >= 0; --a) {
    if (half_[a] < 0) throw std::invalid_argument("Lattice: negative extent");
    stride_[a] = s;
    s *= static_cast<std::size_t>(extent(a));
  }
  size_ = s;
}

Lattice Lattice::box(int n, double h, double radius) {
  const double q = radius / h;
  const long m = std::lround(q);
  if (m < 1 || std::abs(q - static_cast<double>(m)) > 1e-9 * std::max(1.0, q))
    throw std::invalid_argument("Lattice::box: radius is not a multiple of h");
  const int k = static_cast<int>(m);
  return Lattice(n, h, {k, k, k});
}

Index Lattice::unravel(std::size_t k) const {
  Index ijk{0, 0, 0};
  for (int a = 0; a < axes(); ++a) {
    ijk[a] = static_cast<int>(k / stride_[a]) - half_[a];
    k %= stride_[a];
  }
  return ijk;
}

bool Lattice::contains(const Index& ijk) const {
  for (int a = 0; a < axes(); ++a)
    if (ijk[a] < -half_[a] || ijk[a] > half_[a]) return false;
  return true;
}

bool Lattice::on_boundary(const Index& ijk) const {
  for (int a = 0; a < axes(); ++a)
    if (ijk[a] == -half_[a] || ijk[a] == half_[a]) return true;
  return false;
}

double Lattice::xprime_norm2(const Index& ijk) const {
  double s = 0.0;
  for (int a = 0; a < n_ - 1; ++a) s += coord(ijk[a]) * coord(ijk[a]);
  return s;
}

double Lattice::norm2(const Index& ijk) const {
  double s = 0.0;
  for (int a = 0; a < axes(); ++a) s += coord(ijk[a]) * coord(ijk[a]);
  return s;
}

PointXZ Lattice::point(const Index& ijk) const {
  PointXZ p;
  p.xprime.resize(static_cast<std::size_t>(n_ - 1));
  for (int a = 0; a < n_ - 1; ++a) p.xprime[a] = coord(ijk[a]);
  p.xn = xn(ijk);
  p.z = z(ijk);
  return p;
}

GridField::GridField(Lattice lat, bool even_in_z)
    : lat_(std::move(lat)), v_(lat_.size(), 0.0), even_(even_in_z) {}

void GridField::mirror_z() {
  const int za = lat_.z_axis();
  for (std::size_t k = 0; k < v_.size(); ++k) {
    Index ijk = lat_.unravel(k);
    if (ijk[za] >= 0) continue;
    ijk[za] = -ijk[za];
    v_[k] = v_[lat_.linear(ijk)];
  }
}

double discrete_laplacian(const GridField& f, const Index& X) {
  const Lattice& lat = f.lattice();
  if (!lat.contains(X) || lat.on_boundary(X)) throw StencilError("discrete_laplacian: stencil leaves lattice");
  if (lat.on_plate(X)) throw StencilError("discrete_laplacian: centre on P");
  const double c = f.at(X);
  double sum = 0.0;
  for (int a = 0; a < lat.axes(); ++a) {
    Index lo = X, hi = X;
    --lo[a];
    ++hi[a];
    if (lat.on_plate(lo) || lat.on_plate(hi)) throw StencilError("discrete_laplacian: stencil touches P");
    sum += f.at(lo) + f.at(hi) - 2.0 * c;
  }
  return sum / (lat.h() * lat.h());
}

Index node_of(const Lattice& lat, const PointXZ& p) {
  Index ijk{0, 0, 0};
  auto snap = [&](double x) {
    const double q = x / lat.h();
    const long m = std::lround(q);
    if (std::abs(q - static_cast<double>(m)) > 1e-9) throw StencilError("node_of: point is not a lattice node");
    return static_cast<int>(m);
  };
  for (int a = 0; a < lat.n() - 1; ++a) ijk[a] = snap(p.xprime.at(a));
  ijk[lat.xn_axis()] = snap(p.xn);
  ijk[lat.z_axis()] = snap(p.z);
  if (!lat.contains(ijk)) throw StencilError("node_of: point outside lattice");
  return ijk;
}

}  // namespace thinfb
