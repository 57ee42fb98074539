#pragma once

#include <cmath>
#include <numbers>
#include <vector>

namespace thinfb {

/// A point X = (x', x_n, z) of R^{n+1}. x' has n-1 entries (empty for n = 1).
struct PointXZ {
  std::vector<double> xprime;
  double xn = 0.0;
  double z = 0.0;

  double r() const { return std::hypot(xn, z); }
  /// Angle of (x_n, z) in [-pi, pi]; pi on P \ L.
  double theta() const;
  double xprime_norm2() const;
  double norm() const { return std::sqrt(xprime_norm2() + xn * xn + z * z); }
  PointXZ shifted(double dxn) const {
    PointXZ p = *this;
    p.xn += dxn;
    return p;
  }
};

/// The model zero plate P = {x_n <= 0, z = 0} and its edge L = {x_n = 0, z = 0}.
struct SlitGeometry {
  int n = 1;
  double ball_radius = 1.0;

  static bool on_plate(double xn, double z) { return z == 0.0 && xn <= 0.0; }
  static bool on_edge(double xn, double z) { return z == 0.0 && xn == 0.0; }
  static bool on_plate(const PointXZ& p) { return on_plate(p.xn, p.z); }
  static bool on_edge(const PointXZ& p) { return on_edge(p.xn, p.z); }
};

/// Polar angle used by U: atan2(z, t), forced to pi on the open slit.
inline double slit_angle(double t, double z) {
  if (z == 0.0 && t < 0.0) return std::numbers::pi;
  return std::atan2(z, t);
}

/// U(t, z) = r^{1/2} cos(theta/2); exactly 0 on P.
double eval_U(double t, double z);
inline double eval_U(const PointXZ& X) { return eval_U(X.xn, X.z); }

/// dU/dt = cos(theta/2) / (2 r^{1/2}) = U / (2r). Throws SingularPointError on L.
double eval_Un(double t, double z);
inline double eval_Un(const PointXZ& X) { return eval_Un(X.xn, X.z); }

/// U(x_n + eps, z).
inline double eval_U_shifted(const PointXZ& X, double eps) { return eval_U(X.xn + eps, X.z); }

}  // namespace thinfb
