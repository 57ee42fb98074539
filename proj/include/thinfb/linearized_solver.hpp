#pragma once

// Degenerate linearized problem: minimizers of J(w) = int U_n^2 |grad w|^2, which solve
// Delta(U_n w) = 0 off P with vanishing radial derivative on L.

#include <array>
#include <functional>
#include <vector>

#include "thinfb/kernels.hpp"
#include "thinfb/lattice.hpp"

namespace thinfb {

/// Average of U_n^2 over the dual box of the face (lo, lo + e_axis): [lo, lo + h] along the axis and
/// a cell of width h centred on lo across it. Finite on faces along L, positive off the plate.
double face_weight_Un2(const Lattice& lat, int axis, const Index& lo);

struct WeightedField {
  GridField w;
  /// face[a][k] is the weight of the face (k, k + e_a) of the full lattice (0 past the last plane).
  std::array<std::vector<double>, 3> face;

  explicit WeightedField(GridField field);
  WeightedField() = default;
  /// Sum over faces of weight * (difference)^2 * h^(n-1), the discrete J over the box.
  double energy() const;
};

struct BSample {
  double xprime = 0.0;  // 0 when n = 1
  double b = 0.0;
};

struct LinearSolveResult {
  WeightedField field;
  double energy = 0.0;
  std::vector<BSample> b_samples;  // columns |x'| <= box/2 whose fit succeeded
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> energy_trace;  // CG quadratic functional per iteration (J/2 up to a constant)
};

/// Discrete minimizer of J with the lattice-boundary values of `boundary`; P and L nodes are unknowns.
/// Throws invalid_argument for non-finite or non-even data and ConvergenceError when CG stalls.
LinearSolveResult solve_weighted_energy(const GridField& boundary, const CgOptions& opt = {},
                                        const GridField* warm = nullptr);

/// Explicit minimizer: -|x'|^2/(n-1) + 2 x_n r for n >= 2, and 2 x_n r - r^2 for n = 1.
double explicit_minimizer(const PointXZ& X, int n);

/// w with Delta(U_n w) = 0 off P: the discrete harmonic function W with W = U_n * boundary on the
/// lattice boundary and 0 on P, divided by U_n. P nodes hold NaN.
GridField un_harmonic_extension(const GridField& boundary, const CgOptions& opt = {});

/// max |discrete Laplacian of U_n w| over interior nodes whose stencil avoids P, with r >= min_r
/// and distance to P at least min_plate_dist.
double check_Un_harmonic(const GridField& w, double min_r = 0.0, double min_plate_dist = 0.0);

struct BFit {
  double b = 0.0;
  double intercept = 0.0;  // the trace w(x', 0, 0) seen from the annulus
  double constant = 0.0;   // rms residual / r_out^{3/2}
  int points = 0;
};

/// Least-squares fit w(x', x_n, z) ~ c + b r over the section nodes with r in [2h, 16h], P excluded.
/// Throws StencilError if the annulus leaves the lattice or x' is not a column, FitError if the
/// normalized residual exceeds max_constant.
BFit fit_b(const GridField& w, const std::vector<double>& xprime, double max_constant = 4.0);
inline double extract_b(const GridField& w, const std::vector<double>& xprime) { return fit_b(w, xprime).b; }

/// Solution of Delta H = U_t f in B_{1/2} minus the slit {t <= 0, z = 0}, H = 0 on the slit, computed on
/// the conformal image: with (t, z) = ((s^2 - y^2)/2, s y), H~(s, y) = H(t, z) solves
/// Delta H~ = s f~ / sqrt(2) on the half disk {s > 0, s^2 + y^2 < 1} with H~ = 0 on {s = 0}.
struct SlitField2D {
  double hs = 0.0;
  int ns = 0;  // nodes s_i = i hs for i in [0, ns], y_j = j hs for j in [-ns, ns]
  std::vector<double> values;
  std::vector<unsigned char> inside;
  double a_s = 0.0;  // H~_s(0, 0) by a one-sided second-order difference
  CgResult info;

  std::size_t node(int i, int j) const { return static_cast<std::size_t>(i) * (2 * ns + 1) + (j + ns); }
  double at(int i, int j) const { return values[node(i, j)]; }
  /// Coefficient a in H ~ a U; U = s / sqrt(2) on the image, so a = sqrt(2) H~_s(0, 0).
  double coefficient() const;
  /// b = H / (r U_t) at the tip, i.e. 2a.
  double trace_b() const { return 2.0 * coefficient(); }
  /// Bilinear interpolation of H~.
  double eval_tilde(double s, double y) const;
  /// H(t, z) through the principal branch s + i y = sqrt(2 (t + i z)).
  double eval(double t, double z) const;
};

/// f and boundary are functions of (t, z); boundary is read on |(t, z)| = 1/2.
SlitField2D solve_2d_slit_rhs(const std::function<double(double, double)>& f,
                              const std::function<double(double, double)>& boundary, double hs,
                              const CgOptions& opt = {});

/// sup over inside nodes of |H - a U| / (r^{1/2} U), evaluated on the image where it reads
/// |H~ - a_s s| / (rho s / 2).
double measure_HaU_constant(const SlitField2D& H);

struct LinearFlatnessReport {
  std::vector<double> a0;  // n - 1 entries
  double w0 = 0.0;
  double C_meas = 0.0;
  long samples = 0;
};

/// Fits a0 by least squares on the L trace w(x', 0, 0), |x'| <= radius, then
/// C_meas = sup over nodes of B_radius \ {0} of |w - w(0) - a0 x'| / |X|^{3/2}.
LinearFlatnessReport verify_improvement_of_flatness_linear(const GridField& w, double radius = 0.25);

}  // namespace thinfb
