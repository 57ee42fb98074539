#pragma once

// Even-in-z problems on a Lattice, reduced to the half lattice z >= 0. Faces lying in the
// plane z = 0 and the z = 0 diagonal/source terms carry weight 1/2, which makes the half
// system the exact restriction of the even full-lattice quadratic form.

#include <cstddef>
#include <functional>
#include <vector>

#include "thinfb/kernels.hpp"
#include "thinfb/lattice.hpp"

namespace thinfb {

class HalfSystem {
 public:
  /// face_weight(axis, lo) is the weight of the face (lo, lo + e_axis); is_fixed marks Dirichlet nodes.
  /// Lattice boundary nodes are always fixed.
  HalfSystem(const Lattice& lat, const std::function<double(int, const Index&)>& face_weight,
             const std::function<bool(const Index&)>& is_fixed,
             const std::function<double(const Index&)>& diag_extra = {});

  const Lattice& lattice() const { return lat_; }
  const FaceOperator& op() const { return A_; }
  std::size_t size() const { return A_.size(); }
  Index index(std::size_t k) const;
  std::size_t full(std::size_t k) const { return lat_.linear(index(k)); }

  /// Solves for the free nodes: fixed nodes take `fixed` values, free nodes satisfy
  /// A u = source (source is per full-lattice node, may be null). `warm` seeds the iteration.
  /// Returns the even full-lattice field. Throws ConvergenceError when CG stalls.
  GridField solve(const GridField& fixed, const std::vector<double>* source, const CgOptions& opt,
                  const GridField* warm = nullptr, CgResult* info = nullptr) const;

 private:
  Lattice lat_;
  FaceOperator A_;
};

}  // namespace thinfb
