#include "thinfb/linearized_solver.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include "thinfb/errors.hpp"
#include "thinfb/geometry.hpp"
#include "thinfb/slit_system.hpp"

namespace thinfb {

namespace {

constexpr int kFitInner = 2;
constexpr int kFitOuter = 16;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

namespace {

// Antiderivative of U_n^2 = 1/(8r) + t/(8r^2) in both variables, continuous on the plane.
double un2_antiderivative(double t, double z) {
  const double r = std::hypot(t, z);
  if (r == 0.0) return 0.0;
  // x ln(y + r) with y + r evaluated without cancellation when y < 0
  auto xlog = [r](double x, double y) {
    if (x == 0.0) return 0.0;
    return x * std::log(y >= 0.0 ? y + r : x * x / (r - y));
  };
  const double inv_r = xlog(t, z) + xlog(z, t);
  const double t_r2 = (z == 0.0 ? 0.0 : z * std::log(r) - z) + (t == 0.0 ? 0.0 : t * std::atan(z / t));
  return (inv_r + t_r2) / 8.0;
}

}  // namespace

double face_weight_Un2(const Lattice& lat, int axis, const Index& lo) {
  const int na = lat.xn_axis(), za = lat.z_axis();
  const double h = lat.h();
  // dual box of the face: [lo, lo + h] along the face axis, [lo - h/2, lo + h/2] across it
  auto range = [&](int a) {
    const double c = lat.coord(lo[a]);
    return a == axis ? std::pair{c, c + h} : std::pair{c - 0.5 * h, c + 0.5 * h};
  };
  const auto [t1, t2] = range(na);
  const auto [z1, z2] = range(za);
  const double I = un2_antiderivative(t2, z2) - un2_antiderivative(t1, z2) - un2_antiderivative(t2, z1) +
                   un2_antiderivative(t1, z1);
  return I / (h * h);
}

WeightedField::WeightedField(GridField field) : w(std::move(field)) {
  const Lattice& lat = w.lattice();
  for (int a = 0; a < lat.axes(); ++a) {
    face[a].assign(lat.size(), 0.0);
    for (std::size_t k = 0; k < lat.size(); ++k) {
      const Index ijk = lat.unravel(k);
      if (ijk[a] < lat.half(a)) face[a][k] = face_weight_Un2(lat, a, ijk);
    }
  }
}

double WeightedField::energy() const {
  const Lattice& lat = w.lattice();
  double e = 0.0;
  for (int a = 0; a < lat.axes(); ++a)
    for (std::size_t k = 0; k < lat.size(); ++k) {
      if (face[a][k] == 0.0) continue;
      const double d = w[k + lat.stride(a)] - w[k];
      e += face[a][k] * d * d;
    }
  return e * std::pow(lat.h(), lat.n() - 1);
}

// ============================================================================
// Weighted-energy minimizer
// ============================================================================

LinearSolveResult solve_weighted_energy(const GridField& boundary, const CgOptions& opt, const GridField* warm) {
  const Lattice& lat = boundary.lattice();
  const int za = lat.z_axis();
  for (std::size_t k = 0; k < lat.size(); ++k) {
    if (!std::isfinite(boundary[k])) throw std::invalid_argument("solve_weighted_energy: non-finite boundary data");
    Index m = lat.unravel(k);
    m[za] = -m[za];
    if (boundary[k] != boundary.at(m)) throw std::invalid_argument("solve_weighted_energy: data not even in z");
  }
  const HalfSystem sys(
      lat, [&lat](int a, const Index& lo) { return face_weight_Un2(lat, a, lo); },
      [](const Index&) { return false; });
  CgResult info;
  GridField w = sys.solve(boundary, nullptr, opt, warm, &info);

  LinearSolveResult res;
  res.field = WeightedField(std::move(w));
  res.energy = res.field.energy();
  res.iterations = info.iterations;
  res.residual = info.residual;
  res.energy_trace = std::move(info.energy);

  const double box = lat.half(lat.xn_axis()) * lat.h();
  if (lat.n() == 1) {
    try {
      res.b_samples.push_back({0.0, extract_b(res.field.w, {})});
    } catch (const std::runtime_error&) {
    } catch (const std::out_of_range&) {
    }
  } else {
    for (int i = -lat.half(0); i <= lat.half(0); ++i) {
      const double xp = lat.coord(i);
      if (std::abs(xp) > 0.5 * box + 1e-12) continue;
      try {
        res.b_samples.push_back({xp, extract_b(res.field.w, {xp})});
      } catch (const std::runtime_error&) {
      } catch (const std::out_of_range&) {
      }
    }
  }
  return res;
}

double explicit_minimizer(const PointXZ& X, int n) {
  const double r = X.r();
  if (n == 1) return 2.0 * X.xn * r - r * r;
  return -X.xprime_norm2() / (n - 1) + 2.0 * X.xn * r;
}

GridField un_harmonic_extension(const GridField& boundary, const CgOptions& opt) {
  const Lattice& lat = boundary.lattice();
  GridField fixed(lat, true);
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    if (lat.on_boundary(ijk) && !lat.on_plate(ijk)) fixed[k] = eval_Un(lat.xn(ijk), lat.z(ijk)) * boundary[k];
  }
  const HalfSystem sys(
      lat, [](int, const Index&) { return 1.0; }, [&lat](const Index& ijk) { return lat.on_plate(ijk); });
  GridField W = sys.solve(fixed, nullptr, opt);
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    W[k] = lat.on_plate(ijk) ? kNaN : W[k] / eval_Un(lat.xn(ijk), lat.z(ijk));
  }
  return W;
}

double check_Un_harmonic(const GridField& w, double min_r, double min_plate_dist) {
  const Lattice& lat = w.lattice();
  GridField q(lat, w.even_in_z());
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    q[k] = lat.on_plate(ijk) ? 0.0 : eval_Un(lat.xn(ijk), lat.z(ijk)) * w[k];
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    const double xn = lat.xn(ijk), z = lat.z(ijk), r = std::hypot(xn, z);
    if (lat.on_boundary(ijk) || r < min_r || (xn <= 0.0 ? std::abs(z) : r) < min_plate_dist) continue;
    try {
      worst = std::max(worst, std::abs(discrete_laplacian(q, ijk)));
    } catch (const StencilError&) {
    }
  }
  return worst;
}

// ============================================================================
// Radial-derivative trace
// ============================================================================

BFit fit_b(const GridField& w, const std::vector<double>& xprime, double max_constant) {
  const Lattice& lat = w.lattice();
  const int na = lat.xn_axis(), za = lat.z_axis();
  if (lat.half(na) <= kFitOuter || lat.half(za) <= kFitOuter)
    throw StencilError("fit_b: annulus leaves the lattice");
  PointXZ p;
  p.xprime = xprime;
  Index ijk = node_of(lat, p);
  const double h = lat.h();

  double s1 = 0, sr = 0, srr = 0, sw = 0, swr = 0;
  std::vector<std::pair<double, double>> pts;
  for (int i = -kFitOuter; i <= kFitOuter; ++i)
    for (int j = -kFitOuter; j <= kFitOuter; ++j) {
      const int m2 = i * i + j * j;
      if (m2 < kFitInner * kFitInner || m2 > kFitOuter * kFitOuter) continue;
      if (j == 0 && i <= 0) continue;
      ijk[na] = i;
      ijk[za] = j;
      const double r = h * std::sqrt(static_cast<double>(m2)), v = w.at(ijk);
      s1 += 1;
      sr += r;
      srr += r * r;
      sw += v;
      swr += v * r;
      pts.emplace_back(r, v);
    }
  BFit fit;
  fit.points = static_cast<int>(pts.size());
  const double det = s1 * srr - sr * sr;
  fit.b = (s1 * swr - sr * sw) / det;
  fit.intercept = (sw - fit.b * sr) / s1;
  double ss = 0.0;
  for (const auto& [r, v] : pts) {
    const double e = v - fit.intercept - fit.b * r;
    ss += e * e;
  }
  fit.constant = std::sqrt(ss / s1) / std::pow(kFitOuter * h, 1.5);
  if (!(fit.constant <= max_constant))
    throw FitError("fit_b: normalized residual " + std::to_string(fit.constant) + " above " +
                   std::to_string(max_constant));
  return fit;
}

// ============================================================================
// Conformal 2-D reduction
// ============================================================================

double SlitField2D::coefficient() const { return std::sqrt(2.0) * a_s; }

double SlitField2D::eval_tilde(double s, double y) const {
  const double fs = s / hs, fy = y / hs;
  int i = static_cast<int>(std::floor(fs)), j = static_cast<int>(std::floor(fy));
  i = std::clamp(i, 0, ns - 1);
  j = std::clamp(j, -ns, ns - 1);
  const double u = fs - i, v = fy - j;
  return (1 - u) * (1 - v) * at(i, j) + u * (1 - v) * at(i + 1, j) + (1 - u) * v * at(i, j + 1) +
         u * v * at(i + 1, j + 1);
}

double SlitField2D::eval(double t, double z) const {
  const std::complex<double> q = std::sqrt(std::complex<double>(2.0 * t, 2.0 * std::abs(z)));
  const double y = z < 0.0 ? -q.imag() : q.imag();
  return eval_tilde(q.real(), y);
}

SlitField2D solve_2d_slit_rhs(const std::function<double(double, double)>& f,
                              const std::function<double(double, double)>& boundary, double hs,
                              const CgOptions& opt) {
  if (!(hs > 0.0) || hs > 0.25) throw std::invalid_argument("solve_2d_slit_rhs: hs must lie in (0, 1/4]");
  SlitField2D H;
  H.hs = hs;
  H.ns = static_cast<int>(std::ceil(1.0 / hs - 1e-9));
  const int ns = H.ns, ny = 2 * ns + 1;
  FaceOperator A({ns + 1, ny, 1}, 2);
  const std::size_t m = A.size();
  H.values.assign(m, 0.0);
  H.inside.assign(m, 0);

  auto Phi = [](double s, double y) { return std::pair{0.5 * (s * s - y * y), s * y}; };
  auto bvalue = [&](double s, double y) {
    const auto [t, z] = Phi(s, y);
    return boundary(t, z);
  };
  auto is_inside = [&](int i, int j) {
    const double s = i * hs, y = j * hs;
    return i > 0 && s * s + y * y < 1.0 - 1e-12;
  };

  std::vector<double> b(m, 0.0), x(m, 0.0);
  for (int i = 0; i <= ns; ++i)
    for (int j = -ns; j <= ns; ++j) {
      const std::size_t k = H.node(i, j);
      const double s = i * hs, y = j * hs;
      if (is_inside(i, j)) {
        H.inside[k] = 1;
        A.free[k] = 1;
        const auto [t, z] = Phi(s, y);
        b[k] = -hs * hs * s * f(t, z) / std::sqrt(2.0);
      } else if (i > 0) {
        // outside node: radial projection of the arc value, used only for interpolation
        const double rho = std::hypot(s, y);
        H.values[k] = bvalue(s / rho, y / rho);
      }
    }
  // Faces. Lattice faces between two inside nodes or to the s = 0 line carry weight 1; a face
  // crossing the arc at fraction theta carries 1/theta with the arc value moved into b.
  for (int i = 1; i <= ns; ++i)
    for (int j = -ns; j <= ns; ++j) {
      if (!is_inside(i, j)) continue;
      const std::size_t k = H.node(i, j);
      const double s = i * hs, y = j * hs;
      auto arc = [&](int di, int dj) {
        double theta;
        double sb = s, yb = y;
        if (di != 0) {
          sb = std::sqrt(1.0 - y * y);
          theta = (sb - s) / hs;
        } else {
          yb = dj * std::sqrt(1.0 - s * s);
          theta = std::abs(yb - y) / hs;
        }
        theta = std::max(theta, 1e-6);
        b[k] += bvalue(sb, yb) / theta;
        return 1.0 / theta;
      };
      // +s neighbour
      if (i + 1 <= ns && is_inside(i + 1, j))
        A.w[0][k] = 1.0;
      else
        A.diag_extra[k] += arc(1, 0);
      // -s neighbour: inside or the s = 0 line (value 0)
      if (!is_inside(i - 1, j)) A.w[0][H.node(i - 1, j)] = 1.0;
      // +y neighbour
      if (j + 1 <= ns && is_inside(i, j + 1))
        A.w[1][k] = 1.0;
      else
        A.diag_extra[k] += arc(0, 1);
      if (j - 1 < -ns || !is_inside(i, j - 1)) A.diag_extra[k] += arc(0, -1);
    }
  H.info = pcg(A, b, x, opt);
  if (!H.info.converged)
    throw ConvergenceError("solve_2d_slit_rhs: residual " + std::to_string(H.info.residual) + " after " +
                           std::to_string(H.info.iterations) + " iterations");
  for (std::size_t k = 0; k < m; ++k)
    if (H.inside[k]) H.values[k] = x[k];
  H.a_s = (4.0 * H.at(1, 0) - H.at(2, 0)) / (2.0 * hs);
  return H;
}

double measure_HaU_constant(const SlitField2D& H) {
  double worst = 0.0;
  for (int i = 1; i <= H.ns; ++i)
    for (int j = -H.ns; j <= H.ns; ++j) {
      if (!H.inside[H.node(i, j)]) continue;
      const double s = i * H.hs, y = j * H.hs;
      worst = std::max(worst, std::abs(H.at(i, j) - H.a_s * s) / (0.5 * std::hypot(s, y) * s));
    }
  return worst;
}

// ============================================================================
// Improvement of flatness
// ============================================================================

LinearFlatnessReport verify_improvement_of_flatness_linear(const GridField& w, double radius) {
  const Lattice& lat = w.lattice();
  const double r2 = radius * radius * (1.0 + 1e-12);
  LinearFlatnessReport rep;
  rep.w0 = w.at({0, 0, 0});
  if (lat.n() == 2) {
    double sx = 0, sxx = 0, sv = 0, sxv = 0, s1 = 0;
    for (int i = -lat.half(0); i <= lat.half(0); ++i) {
      const double x = lat.coord(i);
      if (x * x > r2) continue;
      const double v = w.at({i, 0, 0});
      s1 += 1;
      sx += x;
      sxx += x * x;
      sv += v;
      sxv += x * v;
    }
    rep.a0 = {(s1 * sxv - sx * sv) / (s1 * sxx - sx * sx)};
  }
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    const double n2 = lat.norm2(ijk);
    if (n2 > r2 || n2 == 0.0) continue;
    const double lin = lat.n() == 2 ? rep.a0[0] * lat.coord(ijk[0]) : 0.0;
    rep.C_meas = std::max(rep.C_meas, std::abs(w[k] - rep.w0 - lin) / std::pow(n2, 0.75));
    ++rep.samples;
  }
  return rep;
}

}  // namespace thinfb
