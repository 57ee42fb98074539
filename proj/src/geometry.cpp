#include "thinfb/geometry.hpp"

#include "thinfb/errors.hpp"

namespace thinfb {

double PointXZ::theta() const { return slit_angle(xn, z); }

double PointXZ::xprime_norm2() const {
  double s = 0.0;
  for (double v : xprime) s += v * v;
  return s;
}

double eval_U(double t, double z) {
  if (z == 0.0 && t <= 0.0) return 0.0;
  const double r = std::hypot(t, z);
  return std::sqrt(r) * std::cos(0.5 * slit_angle(t, z));
}

double eval_Un(double t, double z) {
  if (z == 0.0 && t == 0.0) throw SingularPointError("eval_Un: r = 0 on L");
  if (z == 0.0 && t < 0.0) return 0.0;
  const double r = std::hypot(t, z);
  return std::cos(0.5 * slit_angle(t, z)) / (2.0 * std::sqrt(r));
}

}  // namespace thinfb
