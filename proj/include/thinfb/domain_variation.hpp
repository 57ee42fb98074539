#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "thinfb/geometry.hpp"
#include "thinfb/lattice.hpp"

namespace thinfb {

/// A field given pointwise, e.g. a closed form or an interpolated lattice field.
using FieldFn = std::function<double(const PointXZ&)>;

struct Ball {
  PointXZ center;
  double radius = 1.0;
  bool contains(const PointXZ& X) const;
};

/// All w in [-1, 1] with g(X - eps w e_n) = U(X), ascending.
struct VariationSample {
  PointXZ X;
  std::vector<double> values;
};

/// Sandwich U(X - eps e_n) <= g(X) <= U(X + eps e_n) at every lattice node of `ball`.
bool check_flatness_sandwich(const GridField& g, double eps, const Ball& ball, double tol = 0.0);

/// Scans s in [-1, 1] at spacing 1/64 for sign changes of g(X - eps s e_n) - U(X), then bisects
/// each bracket to machine precision. Values are kept if they re-substitute within tol.
/// Throws SingularPointError on P and BracketError if nothing is found.
VariationSample compute_variation(const FieldFn& g, double eps, const PointXZ& X, double tol = 1e-10);

/// Lattice version: the e_n-section through X is interpolated by monotone cubics (PCHIP).
/// X must lie on a lattice column and at distance >= h from P; the section must stay inside.
VariationSample compute_variation(const GridField& g, double eps, const PointXZ& X, double tol = 1e-10);

/// PCHIP interpolation of g along the e_n-column through (x', z); x' and z must be lattice values.
double section_value(const GridField& g, const PointXZ& X);

/// Batch over points; points within one cell of P (lattice) or on P (closed form) are skipped.
std::vector<VariationSample> compute_variations(const GridField& g, double eps, const std::vector<PointXZ>& points,
                                                double tol = 1e-10, bool parallel = true);
std::vector<VariationSample> compute_variations(const FieldFn& g, double eps, const std::vector<PointXZ>& points,
                                                double tol = 1e-10, bool parallel = true);

/// Direction nu = ((0, 1) + eps (a0, 0)) / sqrt(1 + eps^2 |a0|^2), as (nu', nu_n).
struct Direction {
  std::vector<double> nu_prime;
  double nu_n = 1.0;
};
Direction rotated_direction(const std::vector<double>& a0, double eps);

/// u(X) = U(x . nu - (eps/2) rho, z).
FieldFn rotated_profile(const std::vector<double>& a0, double rho, double eps);

/// Closed-form variation of rotated_profile: (x'.nu' + (nu_n - 1) x_n) / (eps nu_n) - rho / (2 nu_n).
double oracle_variation_rotated(const std::vector<double>& a0, double rho, double eps, const PointXZ& X);

struct EnvelopeRow {
  int scale = 0;
  Ball ball;
  long count = 0;  // samples inside the ball; 0 means excluded
  double a = 0.0;
  double b = 0.0;
  double width() const { return b - a; }
};

/// Balls B_{rho0 eta^m}(center), m = 0..count-1.
std::vector<Ball> dyadic_balls(const PointXZ& center, double rho0, double eta, int count);

/// Per ball: a = min and b = max over all values of samples inside it. Empty balls get count 0.
std::vector<EnvelopeRow> build_envelopes(const std::vector<VariationSample>& samples, const std::vector<Ball>& balls);

/// Pointwise envelope pair: a_eps(X) = min values, b_eps(X) = max values.
struct EnvelopePair {
  std::vector<PointXZ> points;
  std::vector<double> a_eps;
  std::vector<double> b_eps;
};
EnvelopePair pointwise_envelopes(const std::vector<VariationSample>& samples);

/// CSV columns: scale, center, radius, count, a, b, b_minus_a. Centre coordinates are space separated.
void write_envelope_csv(std::ostream& os, const std::vector<EnvelopeRow>& rows);

/// g1 <= g2 + tol at every lattice node of `ball`. Throws std::invalid_argument on lattice mismatch.
bool check_ordering(const GridField& g1, const GridField& g2, const Ball& ball, double tol = 0.0);

}  // namespace thinfb
