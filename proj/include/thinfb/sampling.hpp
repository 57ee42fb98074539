#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace thinfb {

/// The single seeded generator behind every randomized scan.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  /// Uniform on [0, 1) from the top 53 bits (platform independent).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

struct Pt2 {
  double t;
  double z;
};

/// Scan set in the (t, z) plane: tensor grid of spacing grid_h inside the closed disk
/// of the given radius, followed by `random_count` uniform points in the disk.
std::vector<Pt2> disk_samples(double radius, double grid_h, int random_count, std::uint64_t seed);

/// Uniform point in the closed ball of radius `radius` in R^dim (rejection sampling).
std::vector<double> ball_point(Rng& rng, int dim, double radius);

}  // namespace thinfb
