#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "thinfb/certificate.hpp"
#include "thinfb/geometry.hpp"

namespace thinfb {

/// Radial subsolution v_R(X) = V_R(R - |X' - R e_n|, z), evaluated at X + shift e_n.
struct BarrierSpec {
  int n = 2;
  double R = 100.0;
  double shift = 0.0;
};

/// V_R(t, z) = U(t, z) ((n - 1) t / R + 1).
double eval_VR(const BarrierSpec& spec, double t, double z);

/// R - rho for rho = sqrt(|x'|^2 + (x_n - R)^2), without cancellation.
double barrier_radial_arg(double R, double xp2, double xn);

double eval_vR(const BarrierSpec& spec, const PointXZ& X);
double eval_vR(const BarrierSpec& spec, double xp2, double xn, double z);

/// gamma_R(X) = -|x'|^2/(2R) + 2(n-1) x_n r / R.
double eval_gammaR(const BarrierSpec& spec, const PointXZ& X);
double eval_gammaR(const BarrierSpec& spec, double xp2, double xn, double z);

/// The w in [-1, 1] with v_R(X - w e_n) = U(X). Bisection from [gamma_R -+ 1/R],
/// widened geometrically. Throws BracketError when no sign change exists.
double solve_tilde_vR(const BarrierSpec& spec, const PointXZ& X, double tol = 1e-10);
double solve_tilde_vR(const BarrierSpec& spec, double xp2, double xn, double z, double tol = 1e-10);

/// Brute force of R >= 2t + (n-1)^2 t + 2(n-1) r over a sample_count^2 grid of 0 <= t <= r <= 3.
/// constants: {"R", "R_min"}.
Certificate certify_subharmonicity(const BarrierSpec& spec, int sample_count = 301);

struct BarrierScan {
  double grid_h = 1.0 / 32;  // tensor grid spacing (relative to the scanned ball)
  int random_count = 2000;
  std::uint64_t seed = 1;
};

/// For each s: sup over the scaled scan pattern in B_s \ P of |v_R / U - 1|.
std::vector<double> verify_fb_expansion(const BarrierSpec& spec, const std::vector<double>& radii,
                                        const BarrierScan& scan = {});

struct TildeEstimate {
  double C_meas = 0.0;
  long samples = 0;
  long bracket_failures = 0;
};

/// sup over sampled X in B_ball \ P, |X| >= grid_h, of |tilde v_R - gamma_R| R^2 / |X|^2.
TildeEstimate verify_tilde_estimate(const BarrierSpec& spec, double ball_radius, const BarrierScan& scan = {});

struct ShiftConstants {
  double c0 = 0.0;
  double C0 = 0.0;
  double C1 = 0.0;
  double delta = 0.0;
};

struct ShiftReport {
  bool calibrated = false;  // false if calibration found no admissible constants
  bool pass = false;
  ShiftConstants constants;
  /// upper: v_R(X + (c0/R) e_n) <= (1 + C0/R) U(X) on closed B_1 minus B_{1/4};
  /// gain:  v_R(X + (c0/R) e_n) >= U(X + (c0/2R) e_n) on B_delta;
  /// below: v_R(X - (C1/R) e_n) <= U(X) on closed B_1.
  std::array<Certificate, 3> certs;
};

struct ShiftScan {
  double grid_h = 1.0 / 32;   // lattice spacing on B_1
  int delta_cells = 16;       // lattice cells per delta on B_delta
  double R_ref = 200.0;
};

/// Log-spaced grid search for (c0, C0, C1, delta) at R_ref; see README for the selection rule.
ShiftReport calibrate_shift_constants(int n, const ShiftScan& scan = {});

/// Checks the three shift inequalities at spec.R. Margins are in length units: the largest
/// extra e_n-shift the inequality tolerates (negative when it fails).
ShiftReport verify_shift_inequalities(const BarrierSpec& spec, const ShiftConstants& c, const ShiftScan& scan = {});

/// Calibrates at scan.R_ref, then checks at spec.R.
ShiftReport verify_shift_inequalities(const BarrierSpec& spec, const ShiftScan& scan = {});

}  // namespace thinfb
