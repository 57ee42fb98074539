#include "thinfb/u_properties.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "thinfb/kernels.hpp"
#include "thinfb/sampling.hpp"

namespace thinfb {

namespace {

template <class F>
double scan_min(std::size_t count, bool parallel, F&& f) {
  return parallel ? kernels::min_omp(count, f) : kernels::min_serial(count, f);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double measure_gap_gain(double eps, int sample_count, const ScanOptions& opt) {
  if (!(eps > 0.0 && eps < 2.0)) throw std::invalid_argument("measure_gap_gain: need 0 < eps < 2");
  const auto pts = disk_samples(1.0, opt.grid_h, sample_count, opt.seed);
  return scan_min(pts.size(), opt.parallel, [&](std::size_t k) {
    const auto [t, z] = pts[k];
    const double u = eval_U(t, z);
    if (!(u > 0.0)) return kNaN;
    return (eval_U(t + eps, z) / u - 1.0) / eps;
  });
}

double measure_translation_ratio(double eps, double delta_bar, int sample_count, const ScanOptions& opt) {
  if (!(eps > 0.0 && 2.0 * eps < delta_bar && delta_bar < 1.0))
    throw std::invalid_argument("measure_translation_ratio: need 0 < 2 eps < delta_bar < 1");
  const auto pts = disk_samples(1.0, opt.grid_h, sample_count, opt.seed);
  return -scan_min(pts.size(), opt.parallel, [&](std::size_t k) {
    const auto [t, z] = pts[k];
    if (t * t + z * z < delta_bar * delta_bar) return kNaN;
    const double u = eval_U(t, z);
    if (!(u > 0.0)) return kNaN;
    return -(eval_U(t + eps, z) / u - 1.0) / eps;
  });
}

FlatnessConversion verify_flatness_conversion(const GridField& g, double delta, double K_max) {
  const Lattice& lat = g.lattice();
  std::vector<std::size_t> ball;
  for (std::size_t k = 0; k < lat.size(); ++k)
    if (lat.norm2(lat.unravel(k)) <= 1.0 + 1e-12) ball.push_back(k);

  constexpr double tol = 1e-12;
  FlatnessConversion out;
  out.sup_diff = -kernels::min_omp(ball.size(), [&](std::size_t m) {
    const Index ijk = lat.unravel(ball[m]);
    return -std::abs(g[ball[m]] - eval_U(lat.xn(ijk), lat.z(ijk)));
  });

  auto holds = [&](double K) {
    const double e = K * delta;
    const double worst = kernels::min_omp(ball.size(), [&](std::size_t m) {
      const Index ijk = lat.unravel(ball[m]);
      const double xn = lat.xn(ijk), z = lat.z(ijk), v = g[ball[m]];
      return std::min(v - eval_U(xn - e, z), eval_U(xn + e, z) - v);
    });
    return worst >= -tol;
  };

  if (holds(0.0)) {
    out.satisfiable = true;
    return out;
  }
  if (!holds(K_max)) {
    out.K = K_max;
    return out;
  }
  double lo = 0.0, hi = K_max;
  while (hi - lo > 1e-7 * K_max) {
    const double mid = 0.5 * (lo + hi);
    (holds(mid) ? hi : lo) = mid;
  }
  out.K = hi;
  out.satisfiable = true;
  return out;
}

}  // namespace thinfb
