#include "thinfb/flatness_harness.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "thinfb/errors.hpp"
#include "thinfb/kernels.hpp"

namespace thinfb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// A lattice node of a ball with the inverse profile coordinate t_X (U(t_X, z) = g) where g > 0.
struct Node {
  double xp = 0.0, xn = 0.0, z = 0.0;
  double t = 0.0;
  bool positive = false;
};

std::vector<Node> ball_nodes(const GridField& g, const PointXZ& center, double rho) {
  const Lattice& lat = g.lattice();
  const double h = lat.h(), r2 = rho * rho * (1.0 + 1e-12);
  const double cp = center.xprime.empty() ? 0.0 : center.xprime[0];
  std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
  const double c[3] = {lat.n() == 2 ? cp : center.xn, lat.n() == 2 ? center.xn : center.z, center.z};
  for (int a = 0; a < lat.axes(); ++a) {
    lo[a] = std::max(-lat.half(a), static_cast<int>(std::ceil((c[a] - rho) / h - 1e-9)));
    hi[a] = std::min(lat.half(a), static_cast<int>(std::floor((c[a] + rho) / h + 1e-9)));
  }
  std::vector<Node> out;
  Index ijk{0, 0, 0};
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int l = lo[2]; l <= (lat.axes() == 3 ? hi[2] : lo[2]); ++l) {
        ijk = {i, j, l};
        Node q;
        if (lat.n() == 2) q.xp = lat.coord(i);
        q.xn = lat.xn(ijk);
        q.z = lat.z(ijk);
        const double d2 = (q.xp - cp) * (q.xp - cp) + (q.xn - center.xn) * (q.xn - center.xn) +
                          (q.z - center.z) * (q.z - center.z);
        if (d2 > r2) continue;
        const double v = g.at(ijk);
        if (v > 0.0) {
          q.positive = true;
          q.t = v * v - q.z * q.z / (4.0 * v * v);
        } else if (v < 0.0 || q.z != 0.0) {
          q.t = kNaN;  // no profile translate lies below this value
        }
        out.push_back(q);
      }
  return out;
}

template <class F>
double node_min(const std::vector<Node>& nodes, bool parallel, F&& f) {
  return parallel ? kernels::min_omp(nodes.size(), [&](std::size_t k) { return f(nodes[k]); })
                  : kernels::min_serial(nodes.size(), [&](std::size_t k) { return f(nodes[k]); });
}

template <class F>
double node_max(const std::vector<Node>& nodes, bool parallel, F&& f) {
  return parallel ? kernels::max_omp(nodes.size(), [&](std::size_t k) { return f(nodes[k]); })
                  : kernels::max_serial(nodes.size(), [&](std::size_t k) { return f(nodes[k]); });
}

// max over nodes of the violation of U(x.nu - d, z) <= g <= U(x.nu + d, z) as a length:
// the smallest d for which the sandwich holds (infinite if none does).
double sandwich_half_width(const std::vector<Node>& nodes, double nu_p, double nu_n, bool parallel) {
  return node_max(nodes, parallel, [&](const Node& q) {
    const double s = q.xp * nu_p + q.xn * nu_n;
    if (q.positive) return std::abs(q.t - s);
    if (std::isnan(q.t)) return kInf;
    return std::max(0.0, s);
  });
}

}  // namespace

std::pair<double, double> flatness_at_scale(const GridField& g, double eps, const PointXZ& center, double rho,
                                            bool parallel) {
  const std::vector<Node> nodes = ball_nodes(g, center, rho);
  const double impossible = node_max(nodes, parallel, [](const Node& q) { return std::isnan(q.t) ? 1.0 : 0.0; });
  if (impossible > 0.0) throw BracketError("flatness_at_scale: g below every profile translate at some node");
  const double a_pos = node_min(nodes, parallel, [](const Node& q) { return q.positive ? q.t - q.xn : kNaN; });
  const double a_zero = node_min(nodes, parallel, [](const Node& q) { return q.positive ? kNaN : -q.xn; });
  const double b = node_max(nodes, parallel, [](const Node& q) { return q.positive ? q.t - q.xn : kNaN; }) / eps;
  const double a = std::min(a_pos, a_zero) / eps;
  if (!std::isfinite(b)) throw BracketError("flatness_at_scale: no positive node in the ball");
  if (a < -1.0 - 1e-12 || b > 1.0 + 1e-12)
    throw BracketError("flatness_at_scale: sandwich with [-1, 1] fails (a = " + std::to_string(a) +
                       ", b = " + std::to_string(b) + ")");
  return {a, b};
}

CascadeResult harnack_cascade(const GridField& g, double eps, const PointXZ& center, int m_max, double eta_grid,
                              double rho0, bool parallel) {
  const double h = g.lattice().h();
  CascadeResult res;
  res.cutoff = 4.0 * h / eps;
  std::ostringstream rep;
  double rho = rho0;
  for (int m = 0; m <= m_max; ++m, rho *= eta_grid) {
    if (m > 0 && rho < 2.0 * h) {
      rep << "m = " << m << ": ball radius below 2h\n";
      break;
    }
    const auto [a, b] = flatness_at_scale(g, eps, center, rho, parallel);
    if (m > 0 && b - a < res.cutoff) {
      rep << "m = " << m << ": width " << b - a << " below the resolution cutoff " << res.cutoff << '\n';
      break;
    }
    res.records.push_back({m, rho, center, a, b});
  }

  double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (const auto& r : res.records) {
    if (!(r.width() > 0.0)) continue;
    const double y = std::log(r.width());
    s1 += 1;
    sx += r.m;
    sxx += double(r.m) * r.m;
    sy += y;
    sxy += r.m * y;
  }
  DecayFit& fit = res.fit;
  fit.scales = static_cast<int>(s1);
  fit.sufficient = fit.scales >= 3;
  if (fit.scales >= 2) {
    const double slope = (s1 * sxy - sx * sy) / (s1 * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / s1;
    double ss = 0.0;
    for (const auto& r : res.records)
      if (r.width() > 0.0) {
        const double e = std::log(r.width()) - icpt - slope * r.m;
        ss += e * e;
      }
    fit.decay_factor = std::exp(slope);
    fit.eta_meas = 1.0 - fit.decay_factor;
    fit.slope_log_rho = slope / std::log(eta_grid);
    fit.residual = std::sqrt(ss / s1);
  }
  if (!fit.sufficient) rep << "insufficient scales: " << fit.scales << " with positive width\n";
  res.report = rep.str();
  return res;
}

FlatnessImprovement improvement_of_flatness_check(const GridField& g, double eps, double rho, bool parallel) {
  const Lattice& lat = g.lattice();
  const std::vector<Node> nodes = ball_nodes(g, PointXZ{std::vector<double>(lat.n() - 1, 0.0), 0.0, 0.0}, rho);
  FlatnessImprovement rep;
  rep.allowed = 0.5 * eps * rho;
  auto F = [&](double phi) {
    ++rep.evaluations;
    return sandwich_half_width(nodes, std::sin(phi), std::cos(phi), parallel);
  };
  double best_phi = 0.0, best = F(0.0);
  if (lat.n() == 2) {
    // |nu - e_n| = 2 sin(|phi|/2) <= 2 eps
    const double phi_max = 2.0 * std::asin(std::min(eps, 1.0));
    constexpr int kScan = 33;
    const double dphi = 2.0 * phi_max / (kScan - 1);
    for (int i = 0; i < kScan; ++i) {
      const double phi = -phi_max + i * dphi, v = F(phi);
      if (v < best) best = v, best_phi = phi;
    }
    double lo = std::max(-phi_max, best_phi - dphi), hi = std::min(phi_max, best_phi + dphi);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo), fc = F(c), fd = F(d);
    for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
      if (fc < fd) {
        hi = d, d = c, fd = fc;
        c = hi - gr * (hi - lo), fc = F(c);
      } else {
        lo = c, c = d, fc = fd;
        d = lo + gr * (hi - lo), fd = F(d);
      }
    }
    const double phi = 0.5 * (lo + hi), v = F(phi);
    if (v < best) best = v, best_phi = phi;
    rep.nu = {std::sin(best_phi), std::cos(best_phi)};
  } else {
    rep.nu = {1.0};
  }
  rep.half_width = best;
  rep.found = best <= rep.allowed * (1.0 + 1e-12);
  return rep;
}

void write_decay_csv(std::ostream& os, const std::vector<FlatnessRecord>& records) {
  os << "m,rho,a,b,width\n";
  const auto prec = os.precision(17);
  for (const auto& r : records) os << r.m << ',' << r.rho << ',' << r.a << ',' << r.b << ',' << r.width() << '\n';
  os.precision(prec);
}

}  // namespace thinfb
