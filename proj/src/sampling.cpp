#include "thinfb/sampling.hpp"

#include <cmath>

namespace thinfb {

std::vector<Pt2> disk_samples(double radius, double grid_h, int random_count, std::uint64_t seed) {
  std::vector<Pt2> pts;
  const int m = static_cast<int>(std::floor(radius / grid_h + 1e-9));
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j) {
      const double t = i * grid_h, z = j * grid_h;
      if (t * t + z * z <= radius * radius * (1.0 + 1e-12)) pts.push_back({t, z});
    }
  Rng rng(seed);
  for (int k = 0; k < random_count; ++k) {
    const auto p = ball_point(rng, 2, radius);
    pts.push_back({p[0], p[1]});
  }
  return pts;
}

std::vector<double> ball_point(Rng& rng, int dim, double radius) {
  std::vector<double> p(static_cast<std::size_t>(dim));
  for (;;) {
    double s = 0.0;
    for (double& v : p) {
      v = rng.uniform(-1.0, 1.0);
      s += v * v;
    }
    if (s <= 1.0) break;
  }
  for (double& v : p) v *= radius;
  return p;
}

}  // namespace thinfb
