#pragma once

// Harnack-cascade decay and improvement-of-flatness measurements on lattice fields.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "thinfb/geometry.hpp"
#include "thinfb/lattice.hpp"

namespace thinfb {

struct FlatnessRecord {
  int m = 0;
  double rho = 0.0;
  PointXZ center;
  double a = 0.0;
  double b = 0.0;
  double width() const { return b - a; }
};

/// Tightest (a, b) with U(X + eps a e_n) <= g(X) <= U(X + eps b e_n) at the lattice nodes of
/// B_rho(center). Exact: where g > 0 the sandwich is a bound on t_X - x_n, with t_X the solution
/// of U(t_X, z) = g(X); zero nodes on the plate only bound a.
/// Throws BracketError if the sandwich with [-1, 1] fails or the ball has no positive node.
std::pair<double, double> flatness_at_scale(const GridField& g, double eps, const PointXZ& center, double rho,
                                            bool parallel = true);

struct DecayFit {
  double decay_factor = 0.0;   // exp of the slope of log(width) against m
  double eta_meas = 0.0;       // 1 - decay_factor; widths b_m - a_m ~ (1 - eta)^m
  double slope_log_rho = 0.0;  // slope of log(width) against log(rho_m)
  double residual = 0.0;       // rms residual of the log-linear fit
  int scales = 0;
  bool sufficient = false;     // at least 3 scales with positive width
};

struct CascadeResult {
  std::vector<FlatnessRecord> records;
  DecayFit fit;
  double cutoff = 0.0;  // 4h / eps
  std::string report;
};

/// (a_m, b_m) on B_{rho_m}(center), rho_m = rho0 eta_grid^m, for m = 0.. while the width stays at or
/// above 4h/eps, rho_m >= 2h and m <= m_max. Scale 0 is always recorded; later scales below the
/// cutoff end the cascade without a record.
CascadeResult harnack_cascade(const GridField& g, double eps, const PointXZ& center, int m_max,
                              double eta_grid = 0.5, double rho0 = 0.5, bool parallel = true);

struct FlatnessImprovement {
  bool found = false;
  std::vector<double> nu;  // (nu', nu_n)
  double half_width = 0.0; // smallest max_X |t_X - x . nu| found, length units
  double allowed = 0.0;    // (eps / 2) rho
  int evaluations = 0;
};

/// Searches unit vectors nu with |nu - e_n| <= 2 eps for U(x.nu - (eps/2) rho, z) <= g <= U(x.nu + (eps/2) rho, z)
/// on the lattice nodes of B_rho: a 33-point scan of the angle followed by golden-section refinement.
FlatnessImprovement improvement_of_flatness_check(const GridField& g, double eps, double rho, bool parallel = true);

/// CSV columns m, rho, a, b, width.
void write_decay_csv(std::ostream& os, const std::vector<FlatnessRecord>& records);

}  // namespace thinfb
