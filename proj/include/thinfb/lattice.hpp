#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "thinfb/geometry.hpp"

namespace thinfb {

/// Integer lattice index; only the first n+1 entries are used.
using Index = std::array<int, 3>;

/// Uniform axis-aligned lattice centred at the origin with axes ordered (x', x_n, z).
/// Axis a spans indices [-half[a], half[a]]; z = 0 is always a lattice plane.
class Lattice {
 public:
  Lattice() = default;
  Lattice(int n, double h, std::array<int, 3> half);

  /// Cube [-radius, radius]^{n+1}; radius must be an integer multiple of h.
  static Lattice box(int n, double h, double radius);

  int n() const { return n_; }
  int axes() const { return n_ + 1; }
  double h() const { return h_; }
  int half(int a) const { return half_[a]; }
  int extent(int a) const { return 2 * half_[a] + 1; }
  int xn_axis() const { return n_ - 1; }
  int z_axis() const { return n_; }
  std::size_t size() const { return size_; }
  std::size_t stride(int a) const { return stride_[a]; }

  std::size_t linear(const Index& ijk) const {
    std::size_t k = 0;
    for (int a = 0; a < axes(); ++a) k += static_cast<std::size_t>(ijk[a] + half_[a]) * stride_[a];
    return k;
  }
  Index unravel(std::size_t k) const;

  bool contains(const Index& ijk) const;
  bool on_boundary(const Index& ijk) const;
  bool on_plate(const Index& ijk) const { return ijk[z_axis()] == 0 && ijk[xn_axis()] <= 0; }
  bool on_edge(const Index& ijk) const { return ijk[z_axis()] == 0 && ijk[xn_axis()] == 0; }

  double coord(int i) const { return i * h_; }
  double xn(const Index& ijk) const { return ijk[xn_axis()] * h_; }
  double z(const Index& ijk) const { return ijk[z_axis()] * h_; }
  double xprime_norm2(const Index& ijk) const;
  double norm2(const Index& ijk) const;
  PointXZ point(const Index& ijk) const;

  /// Calls f(Index) for every lattice node in storage order.
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t k = 0; k < size_; ++k) f(unravel(k));
  }

 private:
  int n_ = 1;
  double h_ = 1.0;
  std::array<int, 3> half_{0, 0, 0};
  std::array<std::size_t, 3> stride_{0, 0, 0};
  std::size_t size_ = 0;
};

/// Scalar samples on a Lattice.
class GridField {
 public:
  GridField() = default;
  explicit GridField(Lattice lat, bool even_in_z = true);

  /// Samples f(PointXZ). With even_in_z only z >= 0 is evaluated and mirrored.
  template <class F>
  static GridField sample(const Lattice& lat, F&& f, bool even_in_z = true) {
    GridField g(lat, even_in_z);
    for (std::size_t k = 0; k < lat.size(); ++k) {
      const Index ijk = lat.unravel(k);
      if (even_in_z && ijk[lat.z_axis()] < 0) continue;
      g.v_[k] = f(lat.point(ijk));
    }
    if (even_in_z) g.mirror_z();
    return g;
  }

  const Lattice& lattice() const { return lat_; }
  bool even_in_z() const { return even_; }
  std::size_t size() const { return v_.size(); }
  double operator[](std::size_t k) const { return v_[k]; }
  double& operator[](std::size_t k) { return v_[k]; }
  double at(const Index& ijk) const { return v_[lat_.linear(ijk)]; }
  double& at(const Index& ijk) { return v_[lat_.linear(ijk)]; }
  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }

  /// Copies z > 0 values onto z < 0 so that evenness holds exactly.
  void mirror_z();

 private:
  Lattice lat_;
  std::vector<double> v_;
  bool even_ = true;
};

/// Second-order (n+1)-dimensional Laplacian stencil at an interior off-P node.
/// Throws StencilError if the node or a neighbour is outside the lattice or on P.
double discrete_laplacian(const GridField& f, const Index& X);

/// Lattice node of `lat` at physical point p, or throws StencilError if p is not a node.
Index node_of(const Lattice& lat, const PointXZ& p);

}  // namespace thinfb
