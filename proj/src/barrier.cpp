#include "thinfb/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "thinfb/errors.hpp"
#include "thinfb/kernels.hpp"
#include "thinfb/sampling.hpp"

namespace thinfb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTol = 1e-12;

/// Sample reduced to what the barrier sees: |x'|^2, x_n, z.
struct Pt3 {
  double xp2, xn, z;
};

/// Tensor grid of the given spacing in the closed ball of R^{n+1}, optionally with |X| >= inner.
std::vector<Pt3> ball_grid(int n, double radius, double spacing, double inner = 0.0) {
  const int d = n + 1;
  const int m = static_cast<int>(std::floor(radius / spacing + 1e-9));
  std::vector<int> idx(static_cast<std::size_t>(d), -m);
  std::vector<Pt3> out;
  for (;;) {
    double xp2 = 0.0;
    for (int a = 0; a < d - 2; ++a) xp2 += (idx[a] * spacing) * (idx[a] * spacing);
    const double xn = idx[d - 2] * spacing, z = idx[d - 1] * spacing;
    const double r2 = xp2 + xn * xn + z * z;
    if (r2 <= radius * radius * (1.0 + 1e-12) && r2 >= inner * inner * (1.0 - 1e-12)) out.push_back({xp2, xn, z});
    int a = d - 1;
    while (a >= 0 && ++idx[a] > m) idx[a--] = -m;
    if (a < 0) break;
  }
  return out;
}

void add_random(std::vector<Pt3>& pts, int n, double radius, int count, std::uint64_t seed) {
  Rng rng(seed);
  for (int k = 0; k < count; ++k) {
    const auto p = ball_point(rng, n + 1, radius);
    double xp2 = 0.0;
    for (int a = 0; a < n - 1; ++a) xp2 += p[a] * p[a];
    pts.push_back({xp2, p[n - 1], p[n]});
  }
}

double min_over(const std::vector<Pt3>& pts, const std::function<double(const Pt3&)>& f) {
  return kernels::min_omp(pts.size(), [&](std::size_t k) { return f(pts[k]); });
}

/// sup{s in [-S, S] : holds(s)} for a predicate that is true for small s.
double largest_admissible(const std::function<bool(double)>& holds, double S) {
  if (holds(S)) return S;
  if (!holds(-S)) return -S;
  double lo = -S, hi = S;
  for (int it = 0; it < 60 && hi - lo > 1e-6 * S; ++it) {
    const double mid = 0.5 * (lo + hi);
    (holds(mid) ? lo : hi) = mid;
  }
  return lo;
}

std::vector<double> log_candidates(int k_lo, int k_hi) {
  std::vector<double> c;
  for (int k = k_lo; k <= k_hi; ++k) c.push_back(std::exp2(k / 4.0));
  return c;
}

}  // namespace

double eval_VR(const BarrierSpec& spec, double t, double z) {
  return eval_U(t, z) * ((spec.n - 1) * t / spec.R + 1.0);
}

double barrier_radial_arg(double R, double xp2, double xn) {
  const double rho = std::sqrt(xp2 + (xn - R) * (xn - R));
  const double den = R - xn + rho;
  if (xp2 == 0.0 || !(den > 0.0)) return R - rho;
  return xn - xp2 / den;
}

double eval_vR(const BarrierSpec& spec, double xp2, double xn, double z) {
  return eval_VR(spec, barrier_radial_arg(spec.R, xp2, xn + spec.shift), z);
}

double eval_vR(const BarrierSpec& spec, const PointXZ& X) {
  return eval_vR(spec, spec.n > 1 ? X.xprime_norm2() : 0.0, X.xn, X.z);
}

double eval_gammaR(const BarrierSpec& spec, double xp2, double xn, double z) {
  return -xp2 / (2.0 * spec.R) + 2.0 * (spec.n - 1) * xn * std::hypot(xn, z) / spec.R;
}

double eval_gammaR(const BarrierSpec& spec, const PointXZ& X) {
  return eval_gammaR(spec, spec.n > 1 ? X.xprime_norm2() : 0.0, X.xn, X.z);
}

double solve_tilde_vR(const BarrierSpec& spec, double xp2, double xn, double z, double tol) {
  const double target = eval_U(xn, z);
  auto phi = [&](double w) { return eval_vR(spec, xp2, xn - w, z) - target; };
  const double g = std::clamp(eval_gammaR(spec, xp2, xn, z), -1.0, 1.0);
  double half = 1.0 / spec.R;
  double lo = std::max(-1.0, g - half), hi = std::min(1.0, g + half);
  // phi is nonincreasing in w: need phi(lo) >= 0 >= phi(hi).
  while (phi(lo) < 0.0 || phi(hi) > 0.0) {
    if (lo <= -1.0 && hi >= 1.0) throw BracketError("solve_tilde_vR: no sign change in [-1, 1]");
    half *= 2.0;
    lo = std::max(-1.0, g - half);
    hi = std::min(1.0, g + half);
  }
  if (phi(lo) == 0.0) return lo;
  if (phi(hi) == 0.0) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = phi(mid);
    if (f == 0.0) return mid;
    (f > 0.0 ? lo : hi) = mid;
  }
  const double w = 0.5 * (lo + hi);
  if (std::abs(phi(w)) > tol) throw BracketError("solve_tilde_vR: residual above tolerance");
  return w;
}

double solve_tilde_vR(const BarrierSpec& spec, const PointXZ& X, double tol) {
  return solve_tilde_vR(spec, spec.n > 1 ? X.xprime_norm2() : 0.0, X.xn, X.z, tol);
}

Certificate certify_subharmonicity(const BarrierSpec& spec, int sample_count) {
  const int m = std::max(2, sample_count);
  const double k = spec.n - 1;
  double rmin = 0.0;
  long count = 0;
  for (int j = 0; j < m; ++j) {
    const double r = 3.0 * j / (m - 1);
    for (int i = 0; i <= j; ++i) {
      const double t = 3.0 * i / (m - 1);
      rmin = std::max(rmin, 2.0 * t + k * k * t + 2.0 * k * r);
      ++count;
    }
  }
  Certificate c;
  c.id = "subharmonicity";
  c.region = "0<=t<=r<=3";
  c.samples = count;
  c.worst_margin = spec.R - rmin;
  c.pass = c.worst_margin >= 0.0;
  c.constants = {{"R", spec.R}, {"R_min", rmin}};
  return c;
}

std::vector<double> verify_fb_expansion(const BarrierSpec& spec, const std::vector<double>& radii,
                                        const BarrierScan& scan) {
  std::vector<Pt3> unit = ball_grid(spec.n, 1.0, scan.grid_h);
  add_random(unit, spec.n, 1.0, scan.random_count, scan.seed);
  std::vector<double> out;
  for (double s : radii) {
    out.push_back(-min_over(unit, [&](const Pt3& p) {
      const double xn = s * p.xn, z = s * p.z;
      const double u = eval_U(xn, z);
      if (!(u > 0.0)) return kNaN;
      return -std::abs(eval_vR(spec, s * s * p.xp2, xn, z) / u - 1.0);
    }));
  }
  return out;
}

TildeEstimate verify_tilde_estimate(const BarrierSpec& spec, double ball_radius, const BarrierScan& scan) {
  std::vector<Pt3> pts = ball_grid(spec.n, ball_radius, scan.grid_h, scan.grid_h);
  add_random(pts, spec.n, ball_radius, scan.random_count, scan.seed);
  TildeEstimate est;
  std::vector<double> ratio(pts.size(), kNaN);
  std::vector<unsigned char> failed(pts.size(), 0);
  const long long np = static_cast<long long>(pts.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (long long k = 0; k < np; ++k) {
    const Pt3& p = pts[k];
    const double X2 = p.xp2 + p.xn * p.xn + p.z * p.z;
    if (X2 < scan.grid_h * scan.grid_h * (1.0 - 1e-12) || SlitGeometry::on_plate(p.xn, p.z)) continue;
    try {
      const double w = solve_tilde_vR(spec, p.xp2, p.xn, p.z);
      ratio[k] = std::abs(w - eval_gammaR(spec, p.xp2, p.xn, p.z)) * spec.R * spec.R / X2;
    } catch (const BracketError&) {
      failed[k] = 1;
    }
  }
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (failed[k]) ++est.bracket_failures;
    if (ratio[k] == ratio[k]) {
      ++est.samples;
      est.C_meas = std::max(est.C_meas, ratio[k]);
    }
  }
  return est;
}

namespace {

struct ShiftRegions {
  std::vector<Pt3> annulus;  // closed B_1 minus B_{1/4}
  std::vector<Pt3> ball;     // closed B_1
};

ShiftRegions shift_regions(int n, const ShiftScan& scan) {
  return {ball_grid(n, 1.0, scan.grid_h, 0.25), ball_grid(n, 1.0, scan.grid_h)};
}

std::vector<Pt3> delta_ball(int n, double delta, const ShiftScan& scan) {
  return ball_grid(n, delta, delta / scan.delta_cells);
}

// Slack of each inequality with an extra shift s (length units); >= -kTol means it holds.
double slack_upper(const std::vector<Pt3>& pts, int n, double R, double c0, double C0, double s) {
  const BarrierSpec b{n, R, 0.0};
  return min_over(pts, [&](const Pt3& p) {
    return (1.0 + C0 / R) * eval_U(p.xn, p.z) - eval_vR(b, p.xp2, p.xn + c0 / R + s, p.z);
  });
}

double slack_gain(const std::vector<Pt3>& pts, int n, double R, double c0, double s) {
  const BarrierSpec b{n, R, 0.0};
  return min_over(pts, [&](const Pt3& p) {
    return eval_vR(b, p.xp2, p.xn + c0 / R - s, p.z) - eval_U(p.xn + c0 / (2.0 * R), p.z);
  });
}

double slack_below(const std::vector<Pt3>& pts, int n, double R, double C1, double s) {
  const BarrierSpec b{n, R, 0.0};
  return min_over(pts, [&](const Pt3& p) { return eval_U(p.xn, p.z) - eval_vR(b, p.xp2, p.xn - C1 / R + s, p.z); });
}

}  // namespace

ShiftReport calibrate_shift_constants(int n, const ShiftScan& scan) {
  const double R = scan.R_ref;
  const ShiftRegions reg = shift_regions(n, scan);
  ShiftReport rep;
  ShiftConstants& c = rep.constants;

  // Upper constants take one grid step above the smallest passing candidate and delta one
  // step below the largest, so the constants keep slack for R > R_ref.
  const auto big = log_candidates(-16, 36);  // 1/16 .. 512
  for (std::size_t i = 0; i + 1 < big.size(); ++i)
    if (slack_below(reg.ball, n, R, big[i], 0.0) >= -kTol) {
      c.C1 = big[i + 1];
      break;
    }

  // c0: one octave inside the largest value for which the upper inequality is satisfiable at all.
  const auto small = log_candidates(-48, 8);
  const double C0_max = big.back();
  double c0_edge = 0.0;
  for (auto it = small.rbegin(); it != small.rend(); ++it)
    if (slack_upper(reg.annulus, n, R, *it, C0_max, 0.0) >= -kTol) {
      c0_edge = *it;
      break;
    }
  c.c0 = 0.5 * c0_edge;

  if (c.c0 > 0.0) {
    for (std::size_t i = 0; i + 1 < big.size(); ++i)
      if (slack_upper(reg.annulus, n, R, c.c0, big[i], 0.0) >= -kTol) {
        c.C0 = big[i + 1];
        break;
      }
    const auto deltas = log_candidates(-48, -4);  // up to 1/2
    for (std::size_t i = deltas.size() - 1; i >= 1; --i)
      if (slack_gain(delta_ball(n, deltas[i], scan), n, R, c.c0, 0.0) >= -kTol) {
        c.delta = deltas[i - 1];
        break;
      }
  }
  rep.calibrated = c.C1 > 0.0 && c.c0 > 0.0 && c.C0 > 0.0 && c.delta > 0.0;
  return rep;
}

ShiftReport verify_shift_inequalities(const BarrierSpec& spec, const ShiftConstants& c, const ShiftScan& scan) {
  const int n = spec.n;
  const double R = spec.R;
  const ShiftRegions reg = shift_regions(n, scan);
  const std::vector<Pt3> bd = delta_ball(n, c.delta, scan);
  const double S = 8.0 / R;

  ShiftReport rep;
  rep.calibrated = true;
  rep.constants = c;
  const std::map<std::string, double> consts{{"R", R}, {"c0", c.c0}, {"C0", c.C0}, {"C1", c.C1}, {"delta", c.delta}};

  auto make = [&](const char* id, const char* region, const std::vector<Pt3>& pts,
                  const std::function<double(double)>& slack) {
    Certificate cert;
    cert.id = id;
    cert.region = region;
    cert.samples = static_cast<long>(pts.size());
    cert.constants = consts;
    cert.constants["value_slack"] = slack(0.0);
    cert.pass = cert.constants["value_slack"] >= -kTol;
    cert.worst_margin = largest_admissible([&](double s) { return slack(s) >= -kTol; }, S);
    return cert;
  };
  rep.certs[0] = make("shift_upper", "closed B1 minus B1/4", reg.annulus,
                      [&](double s) { return slack_upper(reg.annulus, n, R, c.c0, c.C0, s); });
  rep.certs[1] = make("shift_gain", "B_delta", bd, [&](double s) { return slack_gain(bd, n, R, c.c0, s); });
  rep.certs[2] = make("shift_below", "closed B1", reg.ball, [&](double s) { return slack_below(reg.ball, n, R, c.C1, s); });
  rep.pass = rep.certs[0].pass && rep.certs[1].pass && rep.certs[2].pass;
  return rep;
}

ShiftReport verify_shift_inequalities(const BarrierSpec& spec, const ShiftScan& scan) {
  const ShiftReport cal = calibrate_shift_constants(spec.n, scan);
  if (!cal.calibrated) return cal;
  return verify_shift_inequalities(spec, cal.constants, scan);
}

}  // namespace thinfb
