#include "thinfb/fb_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "thinfb/errors.hpp"
#include "thinfb/slit_system.hpp"

namespace thinfb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kFitInner = 2;   // annulus radii in cells
constexpr int kFitOuter = 16;
constexpr double kThetaMin = 1e-3;  // front nodes closer than this (in cells) to f join the zero phase

int column_count(const Lattice& lat) { return lat.n() == 2 ? lat.extent(0) : 1; }

struct Frame {
  double xp = 0.0;   // x' of the front point
  double f = 0.0;    // x_n of the front point
  double nu_p = 0.0, nu_n = 1.0;  // unit normal pointing into the positive phase
};

Frame frame_at(const PlateState& plate, int c) {
  Frame fr;
  fr.xp = plate.column_coord(c);
  fr.f = plate.front()[c];
  const double s = plate.slope(c), norm = std::sqrt(1.0 + s * s);
  fr.nu_p = -s / norm;
  fr.nu_n = 1.0 / norm;
  return fr;
}

}  // namespace

// ============================================================================
// PlateState
// ============================================================================

PlateState::PlateState(const Lattice& lat, std::vector<double> front)
    : lat_(lat),
      front_(std::move(front)),
      half_n_(lat.half(lat.xn_axis())),
      extent_n_(static_cast<std::size_t>(lat.extent(lat.xn_axis()))) {
  if (static_cast<int>(front_.size()) != column_count(lat_))
    throw std::invalid_argument("PlateState: one front sample per x' column required");
  phase_.assign(front_.size() * extent_n_, Phase::positive);
  rasterize();
}

PlateState PlateState::flat(const Lattice& lat, double f0) {
  return PlateState(lat, std::vector<double>(static_cast<std::size_t>(column_count(lat)), f0));
}

PlateState PlateState::from_graph(const Lattice& lat, const std::function<double(double)>& f) {
  std::vector<double> front(static_cast<std::size_t>(column_count(lat)));
  for (std::size_t c = 0; c < front.size(); ++c)
    front[c] = f(lat.n() == 2 ? lat.coord(static_cast<int>(c) - lat.half(0)) : 0.0);
  return PlateState(lat, std::move(front));
}

double PlateState::column_coord(int c) const { return lat_.n() == 2 ? lat_.coord(c - lat_.half(0)) : 0.0; }

Phase PlateState::phase(const Index& ijk) const {
  const int c = lat_.n() == 2 ? ijk[0] + lat_.half(0) : 0;
  return phase(c, ijk[lat_.xn_axis()]);
}

double PlateState::slope(int c) const {
  const int m = columns();
  if (m < 2) return 0.0;
  const double h = lat_.h();
  if (c == 0) return (front_[1] - front_[0]) / h;
  if (c == m - 1) return (front_[m - 1] - front_[m - 2]) / h;
  return (front_[c + 1] - front_[c - 1]) / (2.0 * h);
}

double PlateState::theta(int c) const {
  const double h = lat_.h();
  const int i = static_cast<int>(std::ceil(front_[c] / h + kThetaMin - 1e-12));
  return std::min(1.0, (lat_.coord(i) - front_[c]) / h);
}

void PlateState::rasterize() {
  for (std::size_t c = 0; c < front_.size(); ++c) {
    bool seen_front = false;
    for (int i = -half_n_; i <= half_n_; ++i) {
      Phase& p = phase_[c * extent_n_ + (i + half_n_)];
      if (lat_.coord(i) < front_[c] + kThetaMin * lat_.h()) {
        p = Phase::zero;
      } else {
        p = seen_front ? Phase::positive : Phase::front;
        seen_front = true;
      }
    }
  }
}

// ============================================================================
// Dirichlet solve
// ============================================================================

GridField solve_dirichlet_slit(const PlateState& plate, const GridField& boundary, const CgOptions& opt,
                               const GridField* warm, CgResult* info) {
  const Lattice& lat = plate.lattice();
  GridField fixed(lat, true);
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    if (!lat.on_boundary(ijk)) continue;
    if (boundary[k] < 0.0) throw std::invalid_argument("solve_dirichlet_slit: negative boundary data");
    fixed[k] = plate.is_zero(ijk) ? 0.0 : boundary[k];
  }
  // Shortley-Weller face between the last zero node and the front node: the zero level sits at f,
  // a distance theta h behind the front node, so the discrete solution moves continuously with f.
  const int na = lat.xn_axis(), za = lat.z_axis();
  auto weight = [&](int a, const Index& lo) {
    if (a != na || lo[za] != 0 || !plate.is_zero(lo)) return 1.0;
    Index hi = lo;
    ++hi[na];
    if (plate.phase(hi) != Phase::front) return 1.0;
    const int c = lat.n() == 2 ? lo[0] + lat.half(0) : 0;
    return 1.0 / plate.theta(c);
  };
  const HalfSystem sys(lat, weight, [&plate](const Index& ijk) { return plate.is_zero(ijk); });
  return sys.solve(fixed, nullptr, opt, warm, info);
}

// ============================================================================
// Coefficient fit
// ============================================================================

FbFit fit_fb_coefficient(const GridField& g, const PlateState& plate, int column, double max_residual) {
  const Lattice& lat = plate.lattice();
  const double h = lat.h();
  const Frame fr = frame_at(plate, column);
  const double tau_p = fr.nu_n, tau_n = -fr.nu_p;
  const int reach = kFitOuter + 1;
  const int na = lat.xn_axis(), za = lat.z_axis();
  const int i0 = static_cast<int>(std::lround(fr.f / h));
  const int c0 = column - (lat.n() == 2 ? lat.half(0) : 0);

  double suu = 0, suv = 0, svv = 0, sgu = 0, sgv = 0, sgg = 0;
  int count = 0;
  Index ijk{0, 0, 0};
  for (int dc = (lat.n() == 2 ? -reach : 0); dc <= (lat.n() == 2 ? reach : 0); ++dc) {
    if (lat.n() == 2) ijk[0] = c0 + dc;
    for (int i = i0 - reach; i <= i0 + reach; ++i) {
      ijk[na] = i;
      const double dxp = lat.n() == 2 ? lat.coord(ijk[0]) - fr.xp : 0.0;
      const double dxn = lat.coord(i) - fr.f;
      const double t = dxp * fr.nu_p + dxn * fr.nu_n;
      const double s = dxp * tau_p + dxn * tau_n;
      if (std::abs(s) > h * (1.0 + 1e-12)) continue;
      for (int l = 0; l <= kFitOuter; ++l) {
        ijk[za] = l;
        const double z = lat.coord(l), rho2 = t * t + z * z;
        if (rho2 < kFitInner * kFitInner * h * h || rho2 > kFitOuter * kFitOuter * h * h) continue;
        if (!lat.contains(ijk)) throw FitError("fit_fb_coefficient: annulus leaves the lattice");
        const double u = eval_U(t, z), v = u / (2.0 * std::sqrt(rho2)), gv = g.at(ijk);
        suu += u * u;
        suv += u * v;
        svv += v * v;
        sgu += gv * u;
        sgv += gv * v;
        sgg += gv * gv;
        ++count;
      }
    }
  }
  if (count < 8) throw FitError("fit_fb_coefficient: too few annulus nodes");
  const double det = suu * svv - suv * suv;
  if (!(det > 0.0)) throw FitError("fit_fb_coefficient: singular normal equations");
  FbFit fit;
  fit.alpha = (sgu * svv - sgv * suv) / det;
  fit.beta = (sgv * suu - sgu * suv) / det;
  fit.points = count;
  // residual sum of squares from the normal equations
  const double rss = sgg - fit.alpha * sgu - fit.beta * sgv;
  fit.residual = sgg > 0.0 ? std::sqrt(std::max(rss, 0.0) / sgg) : 0.0;
  if (fit.residual > max_residual)
    throw FitError("fit_fb_coefficient: relative residual " + std::to_string(fit.residual));
  return fit;
}

double measure_fb_coefficient(const GridField& g, const PlateState& plate, int column) {
  return fit_fb_coefficient(g, plate, column).alpha;
}

std::vector<int> measurable_columns(const PlateState& plate) {
  const Lattice& lat = plate.lattice();
  const double h = lat.h(), reach = (kFitOuter + 1) * h;
  const double bn = lat.half(lat.xn_axis()) * h, bz = lat.half(lat.z_axis()) * h;
  std::vector<int> cols;
  if (bz < kFitOuter * h) return cols;
  for (int c = 0; c < plate.columns(); ++c) {
    if (std::abs(plate.front()[c]) + reach > bn) continue;
    if (lat.n() == 2 && std::abs(plate.column_coord(c)) + reach > lat.half(0) * h) continue;
    cols.push_back(c);
  }
  return cols;
}

// ============================================================================
// Front motion
// ============================================================================

FrontUpdate front_update(const PlateState& plate, const std::vector<double>& alpha, double step) {
  const int m = plate.columns();
  if (static_cast<int>(alpha.size()) != m) throw std::invalid_argument("front_update: alpha size mismatch");
  const Lattice& lat = plate.lattice();
  const double h = lat.h(), lim = lat.half(lat.xn_axis()) * h - h;

  FrontUpdate out{plate, 0.0, 0};
  std::vector<double>& f = out.plate.front();
  std::vector<int> measured;
  for (int c = 0; c < m; ++c) {
    if (std::isnan(alpha[c])) continue;
    if (!std::isfinite(alpha[c])) throw std::invalid_argument("front_update: non-finite alpha");
    const Frame fr = frame_at(plate, c);
    const double d = -step * (alpha[c] - 1.0);
    f[c] = plate.front()[c] + d / fr.nu_n;
    out.max_move = std::max(out.max_move, std::abs(d));
    measured.push_back(c);
  }
  if (measured.empty()) throw std::invalid_argument("front_update: no measured column");

  // linear extrapolation from the nearest two measured columns
  auto extrapolate = [&](int c, int a, int b) {
    if (a == b) return f[a];
    return f[a] + (f[b] - f[a]) * static_cast<double>(c - a) / static_cast<double>(b - a);
  };
  const int lo = measured.front(), hi = measured.back();
  const int lo2 = measured.size() > 1 ? measured[1] : lo;
  const int hi2 = measured.size() > 1 ? measured[measured.size() - 2] : hi;
  for (int c = 0; c < lo; ++c) f[c] = extrapolate(c, lo, lo2);
  for (int c = hi + 1; c < m; ++c) f[c] = extrapolate(c, hi, hi2);
  for (std::size_t j = 0; j + 1 < measured.size(); ++j)
    for (int c = measured[j] + 1; c < measured[j + 1]; ++c) f[c] = extrapolate(c, measured[j], measured[j + 1]);

  for (double& v : f) {
    if (v < -lim || v > lim) {
      v = std::clamp(v, -lim, lim);
      ++out.clipped;
    }
  }
  out.plate.rasterize();
  return out;
}

std::vector<double> project_front_field(const PlateState& plate, const std::vector<double>& values, int degree) {
  const Lattice& lat = plate.lattice();
  const double scale = lat.n() == 2 ? lat.half(0) * lat.h() : 1.0;
  const int m = degree + 1;
  std::vector<double> ata(static_cast<std::size_t>(m * m), 0.0), atb(static_cast<std::size_t>(m), 0.0);
  int count = 0;
  auto basis = [&](int c, std::vector<double>& phi) {
    const double x = plate.column_coord(c) / scale;
    phi[0] = 1.0;
    for (int d = 1; d < m; ++d) phi[d] = phi[d - 1] * x;
  };
  std::vector<double> phi(static_cast<std::size_t>(m));
  for (int c = 0; c < plate.columns(); ++c) {
    if (std::isnan(values[c])) continue;
    basis(c, phi);
    for (int i = 0; i < m; ++i) {
      atb[i] += phi[i] * values[c];
      for (int j = 0; j < m; ++j) ata[i * m + j] += phi[i] * phi[j];
    }
    ++count;
  }
  if (count < m) return values;
  // Gaussian elimination with partial pivoting on the small normal system
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int r = col + 1; r < m; ++r)
      if (std::abs(ata[r * m + col]) > std::abs(ata[piv * m + col])) piv = r;
    for (int j = 0; j < m; ++j) std::swap(ata[col * m + j], ata[piv * m + j]);
    std::swap(atb[col], atb[piv]);
    for (int r = col + 1; r < m; ++r) {
      const double q = ata[r * m + col] / ata[col * m + col];
      for (int j = col; j < m; ++j) ata[r * m + j] -= q * ata[col * m + j];
      atb[r] -= q * atb[col];
    }
  }
  std::vector<double> coef(static_cast<std::size_t>(m));
  for (int i = m - 1; i >= 0; --i) {
    double s = atb[i];
    for (int j = i + 1; j < m; ++j) s -= ata[i * m + j] * coef[j];
    coef[i] = s / ata[i * m + i];
  }
  std::vector<double> out = values;
  for (int c = 0; c < plate.columns(); ++c) {
    if (std::isnan(values[c])) continue;
    basis(c, phi);
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += coef[i] * phi[i];
    out[c] = s;
  }
  return out;
}

// ============================================================================
// Fixed-point iteration
// ============================================================================

FBSolution solve_fb(const GridField& boundary, const PlateState& init, const SolverConfig& cfg) {
  const Lattice& lat = init.lattice();
  const double box = lat.half(lat.xn_axis()) * lat.h();
  double step = cfg.step > 0.0 ? cfg.step : (lat.n() == 1 ? 2.0 : 1.0) * box;

  FBSolution sol;
  sol.plate = init;
  GridField warm;
  bool have_warm = false;
  int halvings = 0, last_halving = 0;
  std::ostringstream report;

  for (int it = 1; it <= cfg.max_iter; ++it) {
    CgResult info;
    sol.g = solve_dirichlet_slit(sol.plate, boundary, cfg.cg, have_warm ? &warm : nullptr, &info);
    warm = sol.g;
    have_warm = true;

    std::vector<double> alpha(static_cast<std::size_t>(sol.plate.columns()), kNaN);
    for (int c : measurable_columns(sol.plate)) {
      try {
        alpha[c] = measure_fb_coefficient(sol.g, sol.plate, c);
      } catch (const FitError& e) {
        report << "iter " << it << " column " << c << ": " << e.what() << '\n';
      }
    }
    const std::vector<double> raw = alpha;
    if (cfg.front_model_degree >= 0 && lat.n() == 2) {
      // project the vertical displacement (alpha - 1) / nu_n so the graph stays in the model space
      std::vector<double> w = alpha;
      for (int c = 0; c < sol.plate.columns(); ++c)
        if (!std::isnan(w[c])) w[c] = (w[c] - 1.0) / frame_at(sol.plate, c).nu_n;
      w = project_front_field(sol.plate, w, cfg.front_model_degree);
      for (int c = 0; c < sol.plate.columns(); ++c)
        if (!std::isnan(w[c])) alpha[c] = 1.0 + w[c] * frame_at(sol.plate, c).nu_n;
    }
    double max_dev = 0.0, model_dev = 0.0;
    bool any = false;
    for (std::size_t c = 0; c < raw.size(); ++c)
      if (!std::isnan(raw[c])) {
        max_dev = std::max(max_dev, std::abs(raw[c] - 1.0));
        model_dev = std::max(model_dev, std::abs(alpha[c] - 1.0));
        any = true;
      }
    sol.alpha = raw;
    FbIteration rec{it, max_dev, model_dev, 0.0, step, info.iterations};
    if (!any) {
      sol.log.push_back(rec);
      sol.diverged = true;
      report << "iter " << it << ": no measurable front column\n";
      break;
    }
    if (model_dev <= cfg.fb_tol) {
      sol.log.push_back(rec);
      sol.converged = true;
      break;
    }
    // oscillation: no decrease of max|alpha - 1| over the last `window` iterations
    if (it - last_halving > cfg.window && max_dev >= sol.log[sol.log.size() - cfg.window].max_dev) {
      if (++halvings > cfg.max_halvings) {
        sol.log.push_back(rec);
        sol.diverged = true;
        report << "iter " << it << ": oscillation persists after " << cfg.max_halvings << " step halvings\n";
        break;
      }
      step *= 0.5;
      last_halving = it;
      report << "iter " << it << ": oscillation, step halved to " << step << '\n';
    }
    FrontUpdate up = front_update(sol.plate, alpha, step);
    if (up.clipped > 0) report << "iter " << it << ": " << up.clipped << " front samples clipped\n";
    rec.max_move = up.max_move;
    rec.step = step;
    sol.log.push_back(rec);
    sol.plate = std::move(up.plate);
  }
  if (!sol.converged && !sol.diverged) report << "iteration cap reached\n";
  sol.report = report.str();
  return sol;
}

// ============================================================================
// Energy and output
// ============================================================================

double dirichlet_energy(const GridField& v, double radius) {
  const Lattice& lat = v.lattice();
  const double h = lat.h(), r2 = radius * radius * (1.0 + 1e-12);
  const double scale = std::pow(h, lat.n() - 1);
  double e = 0.0;
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    for (int a = 0; a < lat.axes(); ++a) {
      if (ijk[a] >= lat.half(a)) continue;
      double mid2 = 0.0;
      for (int b = 0; b < lat.axes(); ++b) {
        const double c = lat.coord(ijk[b]) + (a == b ? 0.5 * h : 0.0);
        mid2 += c * c;
      }
      if (mid2 > r2) continue;
      const double d = v[k + lat.stride(a)] - v[k];
      e += d * d;
    }
  }
  return e * scale;
}

double eval_energy(const GridField& v, double radius) {
  const Lattice& lat = v.lattice();
  const double r2 = radius * radius * (1.0 + 1e-12);
  long positive = 0;
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    if (ijk[lat.z_axis()] == 0 && lat.norm2(ijk) <= r2 && v[k] > 0.0) ++positive;
  }
  return dirichlet_energy(v, radius) + std::pow(lat.h(), lat.n()) * static_cast<double>(positive);
}

void write_field_csv(std::ostream& os, const GridField& g) {
  const Lattice& lat = g.lattice();
  if (lat.n() == 2) os << "i_xp,";
  os << "i_xn,i_z,";
  if (lat.n() == 2) os << "xp,";
  os << "xn,z,value\n";
  const auto prec = os.precision(17);
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const Index ijk = lat.unravel(k);
    for (int a = 0; a < lat.axes(); ++a) os << ijk[a] << ',';
    for (int a = 0; a < lat.axes(); ++a) os << lat.coord(ijk[a]) << ',';
    os << g[k] << '\n';
  }
  os.precision(prec);
}

std::string plate_json(const PlateState& plate) {
  nlohmann::ordered_json j;
  j["h"] = plate.lattice().h();
  j["front"] = plate.front();
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  const int half = plate.lattice().half(plate.lattice().xn_axis());
  static const char* names[] = {"zero", "front", "positive"};
  for (int c = 0; c < plate.columns(); ++c) {
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    Phase cur = plate.phase(c, -half);
    int len = 0;
    for (int i = -half; i <= half; ++i) {
      const Phase p = plate.phase(c, i);
      if (p != cur) {
        runs.push_back({names[static_cast<int>(cur)], len});
        cur = p;
        len = 0;
      }
      ++len;
    }
    runs.push_back({names[static_cast<int>(cur)], len});
    cols.push_back(runs);
  }
  j["phases"] = cols;
  return j.dump();
}

}  // namespace thinfb
