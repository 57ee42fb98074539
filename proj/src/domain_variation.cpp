#include "thinfb/domain_variation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "thinfb/errors.hpp"

namespace thinfb {

namespace {

constexpr int kScanSteps = 128;  // spacing 1/64 on [-1, 1]

double dist2(const PointXZ& a, const PointXZ& b) {
  const std::size_t m = std::max(a.xprime.size(), b.xprime.size());
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double ai = i < a.xprime.size() ? a.xprime[i] : 0.0;
    const double bi = i < b.xprime.size() ? b.xprime[i] : 0.0;
    s += (ai - bi) * (ai - bi);
  }
  return s + (a.xn - b.xn) * (a.xn - b.xn) + (a.z - b.z) * (a.z - b.z);
}

double distance_to_plate(const PointXZ& X) { return X.xn <= 0.0 ? std::abs(X.z) : X.r(); }

int column_index(double c, double h, int half) {
  const double q = c / h;
  const long i = std::lround(q);
  if (std::abs(q - static_cast<double>(i)) > 1e-9 || i < -half || i > half)
    throw StencilError("section: coordinate is not on a lattice column");
  return static_cast<int>(i);
}

// Fritsch-Carlson slope at an interior node from the neighbouring secants.
double pchip_slope(double d0, double d1) {
  if (d0 * d1 <= 0.0) return 0.0;
  return 2.0 * d0 * d1 / (d0 + d1);
}

template <class F>
void for_each_node_in(const Lattice& lat, const Ball& ball, F&& f) {
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    const PointXZ X = lat.point(ijk);
    if (ball.contains(X)) f(k, X);
  }
}

bool same_lattice(const Lattice& a, const Lattice& b) {
  if (a.n() != b.n() || a.h() != b.h()) return false;
  for (int i = 0; i < a.axes(); ++i)
    if (a.half(i) != b.half(i)) return false;
  return true;
}

template <class Compute>
std::vector<VariationSample> batch(const std::vector<PointXZ>& points, Compute&& compute, bool parallel) {
  const long m = static_cast<long>(points.size());
  std::vector<std::optional<VariationSample>> out(points.size());
  std::vector<std::exception_ptr> err(points.size());
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (long i = 0; i < m; ++i) {
    try {
      out[i] = compute(points[i]);
    } catch (...) {
      err[i] = std::current_exception();
    }
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  std::vector<VariationSample> res;
  for (auto& o : out)
    if (o) res.push_back(std::move(*o));
  return res;
}

}  // namespace

bool Ball::contains(const PointXZ& X) const { return dist2(X, center) <= radius * radius * (1.0 + 1e-12); }

bool check_flatness_sandwich(const GridField& g, double eps, const Ball& ball, double tol) {
  bool ok = true;
  for_each_node_in(g.lattice(), ball, [&](std::size_t k, const PointXZ& X) {
    const double v = g[k];
    if (v < eval_U(X.xn - eps, X.z) - tol || v > eval_U(X.xn + eps, X.z) + tol) ok = false;
  });
  return ok;
}

double section_value(const GridField& g, const PointXZ& X) {
  const Lattice& lat = g.lattice();
  const double h = lat.h();
  Index ijk{0, 0, 0};
  for (int a = 0; a < lat.n() - 1; ++a) ijk[a] = column_index(X.xprime.at(a), h, lat.half(a));
  ijk[lat.z_axis()] = column_index(X.z, h, lat.half(lat.z_axis()));

  const int na = lat.xn_axis(), half = lat.half(na);
  const double u = X.xn / h;
  if (u < -half - 1e-9 || u > half + 1e-9) throw StencilError("section: x_n outside the lattice");
  int i0 = static_cast<int>(std::floor(u));
  i0 = std::clamp(i0, -half, half - 1);
  const double t = std::clamp(u - i0, 0.0, 1.0);

  auto y = [&](int i) {
    Index q = ijk;
    q[na] = i;
    return g.at(q);
  };
  const double y0 = y(i0), y1 = y(i0 + 1), d = y1 - y0;
  const double m0 = i0 > -half ? pchip_slope(y0 - y(i0 - 1), d) : d;
  const double m1 = i0 + 1 < half ? pchip_slope(d, y(i0 + 2) - y1) : d;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
}

VariationSample compute_variation(const FieldFn& g, double eps, const PointXZ& X, double tol) {
  if (SlitGeometry::on_plate(X)) throw SingularPointError("compute_variation: X on the plate");
  const double target = eval_U(X);
  auto phi = [&](double s) { return g(X.shifted(-eps * s)) - target; };

  std::vector<double> roots;
  double s_prev = -1.0, f_prev = phi(s_prev);
  if (f_prev == 0.0) roots.push_back(s_prev);
  for (int k = 1; k <= kScanSteps; ++k) {
    const double s = -1.0 + 2.0 * k / kScanSteps, f = phi(s);
    if (f == 0.0) {
      roots.push_back(s);
    } else if (f_prev != 0.0 && (f_prev < 0.0) != (f < 0.0)) {
      double lo = s_prev, hi = s, flo = f_prev;
      for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon(); ++it) {
        const double mid = 0.5 * (lo + hi), fm = phi(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      const double w = 0.5 * (lo + hi);
      if (std::abs(phi(w)) <= tol) roots.push_back(w);
    }
    s_prev = s;
    f_prev = f;
  }
  if (roots.empty()) throw BracketError("compute_variation: no root in [-1, 1]");

  std::sort(roots.begin(), roots.end());
  VariationSample out{X, {}};
  for (double w : roots)
    if (out.values.empty() || w - out.values.back() > std::max(tol, 1e-12)) out.values.push_back(w);
  return out;
}

VariationSample compute_variation(const GridField& g, double eps, const PointXZ& X, double tol) {
  const Lattice& lat = g.lattice();
  if (distance_to_plate(X) < lat.h() * (1.0 - 1e-9))
    throw SingularPointError("compute_variation: X within one cell of the plate");
  const double lim = lat.half(lat.xn_axis()) * lat.h();
  if (std::abs(X.xn) + eps > lim * (1.0 + 1e-12)) throw StencilError("compute_variation: section leaves the lattice");
  return compute_variation([&g](const PointXZ& Y) { return section_value(g, Y); }, eps, X, tol);
}

std::vector<VariationSample> compute_variations(const GridField& g, double eps, const std::vector<PointXZ>& points,
                                                double tol, bool parallel) {
  std::vector<PointXZ> kept;
  for (const auto& X : points)
    if (distance_to_plate(X) >= g.lattice().h() * (1.0 - 1e-9)) kept.push_back(X);
  return batch(kept, [&](const PointXZ& X) { return compute_variation(g, eps, X, tol); }, parallel);
}

std::vector<VariationSample> compute_variations(const FieldFn& g, double eps, const std::vector<PointXZ>& points,
                                                double tol, bool parallel) {
  std::vector<PointXZ> kept;
  for (const auto& X : points)
    if (!SlitGeometry::on_plate(X)) kept.push_back(X);
  return batch(kept, [&](const PointXZ& X) { return compute_variation(g, eps, X, tol); }, parallel);
}

Direction rotated_direction(const std::vector<double>& a0, double eps) {
  double a2 = 0.0;
  for (double a : a0) a2 += a * a;
  const double norm = std::sqrt(1.0 + eps * eps * a2);
  Direction d;
  for (double a : a0) d.nu_prime.push_back(eps * a / norm);
  d.nu_n = 1.0 / norm;
  return d;
}

FieldFn rotated_profile(const std::vector<double>& a0, double rho, double eps) {
  const Direction d = rotated_direction(a0, eps);
  return [d, rho, eps](const PointXZ& X) {
    double s = X.xn * d.nu_n;
    for (std::size_t i = 0; i < d.nu_prime.size(); ++i) s += X.xprime.at(i) * d.nu_prime[i];
    return eval_U(s - 0.5 * eps * rho, X.z);
  };
}

double oracle_variation_rotated(const std::vector<double>& a0, double rho, double eps, const PointXZ& X) {
  const Direction d = rotated_direction(a0, eps);
  double s = (d.nu_n - 1.0) * X.xn;
  for (std::size_t i = 0; i < d.nu_prime.size(); ++i) s += X.xprime.at(i) * d.nu_prime[i];
  return s / (eps * d.nu_n) - rho / (2.0 * d.nu_n);
}

std::vector<Ball> dyadic_balls(const PointXZ& center, double rho0, double eta, int count) {
  std::vector<Ball> out;
  double r = rho0;
  for (int m = 0; m < count; ++m, r *= eta) out.push_back(Ball{center, r});
  return out;
}

std::vector<EnvelopeRow> build_envelopes(const std::vector<VariationSample>& samples, const std::vector<Ball>& balls) {
  std::vector<EnvelopeRow> rows;
  for (std::size_t m = 0; m < balls.size(); ++m) {
    EnvelopeRow row{static_cast<int>(m), balls[m], 0, std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity()};
    for (const auto& s : samples) {
      if (s.values.empty() || !balls[m].contains(s.X)) continue;
      ++row.count;
      row.a = std::min(row.a, s.values.front());
      row.b = std::max(row.b, s.values.back());
    }
    if (row.count == 0) row.a = row.b = std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

EnvelopePair pointwise_envelopes(const std::vector<VariationSample>& samples) {
  EnvelopePair p;
  for (const auto& s : samples) {
    if (s.values.empty()) continue;
    p.points.push_back(s.X);
    p.a_eps.push_back(s.values.front());
    p.b_eps.push_back(s.values.back());
  }
  return p;
}

void write_envelope_csv(std::ostream& os, const std::vector<EnvelopeRow>& rows) {
  os << "scale,center,radius,count,a,b,b_minus_a\n";
  const auto prec = os.precision(17);
  for (const auto& r : rows) {
    os << r.scale << ',';
    for (double c : r.ball.center.xprime) os << c << ' ';
    os << r.ball.center.xn << ' ' << r.ball.center.z << ',' << r.ball.radius << ',' << r.count << ',';
    if (r.count == 0)
      os << "excluded,excluded,excluded\n";
    else
      os << r.a << ',' << r.b << ',' << r.width() << '\n';
  }
  os.precision(prec);
}

bool check_ordering(const GridField& g1, const GridField& g2, const Ball& ball, double tol) {
  if (!same_lattice(g1.lattice(), g2.lattice())) throw std::invalid_argument("check_ordering: lattice mismatch");
  bool ok = true;
  for_each_node_in(g1.lattice(), ball, [&](std::size_t k, const PointXZ&) {
    if (g1[k] > g2[k] + tol) ok = false;
  });
  return ok;
}

}  // namespace thinfb
