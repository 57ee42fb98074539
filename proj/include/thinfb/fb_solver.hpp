#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "thinfb/kernels.hpp"
#include "thinfb/lattice.hpp"

namespace thinfb {

enum class Phase : unsigned char { zero, front, positive };

/// Plate {z = 0} of a lattice: front graph x_n = f(x') sampled at the x' lattice columns
/// (one sample when n = 1) and the rasterized phase of every plate node.
class PlateState {
 public:
  PlateState() = default;
  PlateState(const Lattice& lat, std::vector<double> front);
  static PlateState flat(const Lattice& lat, double f0);
  static PlateState from_graph(const Lattice& lat, const std::function<double(double)>& f);

  const Lattice& lattice() const { return lat_; }
  int columns() const { return static_cast<int>(front_.size()); }
  /// x' coordinate of column c (0 when n = 1).
  double column_coord(int c) const;
  const std::vector<double>& front() const { return front_; }
  std::vector<double>& front() { return front_; }
  /// Phase of the plate node with the given column and x_n index.
  Phase phase(int c, int i) const { return phase_[static_cast<std::size_t>(c) * extent_n_ + (i + half_n_)]; }
  /// Phase of a z = 0 lattice node.
  Phase phase(const Index& ijk) const;
  bool is_zero(const Index& ijk) const { return ijk[lat_.z_axis()] == 0 && phase(ijk) == Phase::zero; }
  /// Slope df/dx' at column c by centred differences (0 when n = 1).
  double slope(int c) const;

  /// Distance from f to the front node of column c, in cells, within [1e-3, 1].
  double theta(int c) const;

  /// Nodes with x_n < f (up to 1e-3 cells) are zero phase; the next node is the front node.
  void rasterize();

 private:
  Lattice lat_;
  std::vector<double> front_;
  std::vector<Phase> phase_;
  int half_n_ = 0;
  std::size_t extent_n_ = 0;
};

/// Discrete harmonic function in the box with the lattice-boundary values of `boundary` and 0 on the
/// zero phase; solved on the half lattice z >= 0 and reflected.
GridField solve_dirichlet_slit(const PlateState& plate, const GridField& boundary, const CgOptions& opt = {},
                               const GridField* warm = nullptr, CgResult* info = nullptr);

struct FbFit {
  double alpha = 0.0;   // coefficient of U
  double beta = 0.0;    // coefficient of U_t; -beta/alpha is the sub-cell tip offset
  double residual = 0.0;  // relative rms residual of the fit
  int points = 0;
};

/// Least-squares fit of g(x0 + t nu + s tau, z) ~ alpha U(t, z) + beta U_t(t, z) over lattice nodes
/// with t^2 + z^2 in [(2h)^2, (16h)^2] and |s| <= h, at front column c.
/// Throws FitError if the relative residual exceeds max_residual or the annulus is incomplete.
FbFit fit_fb_coefficient(const GridField& g, const PlateState& plate, int column, double max_residual = 0.05);
double measure_fb_coefficient(const GridField& g, const PlateState& plate, int column);

/// Columns whose fitting annulus lies inside the lattice.
std::vector<int> measurable_columns(const PlateState& plate);

struct FrontUpdate {
  PlateState plate;
  double max_move = 0.0;  // largest displacement along the normal
  int clipped = 0;        // samples clipped to stay one cell inside the box
};

/// Moves each measured sample by -step (alpha - 1) along its normal (the positive phase advances
/// where alpha > 1), extrapolates linearly to unmeasured columns, and re-rasterizes.
/// `alpha` has one entry per column; NaN entries are unmeasured.
FrontUpdate front_update(const PlateState& plate, const std::vector<double>& alpha, double step);

/// Least-squares projection of per-column values (NaN = absent) on polynomials in x' of the given degree.
std::vector<double> project_front_field(const PlateState& plate, const std::vector<double>& values, int degree);

struct SolverConfig {
  double fb_tol = 0.004;
  double step = 0.0;        // length units; 0 selects 2 x box radius (n = 1) or the box radius (n = 2)
  int max_iter = 60;
  int window = 4;           // iterations without decrease of max|alpha - 1| that count as oscillation
  int max_halvings = 4;
  int front_model_degree = 2;  // n = 2: alpha is projected on polynomials in x' of this degree; -1 disables
  CgOptions cg{1e-10, 20000, true, false};
};

struct FbIteration {
  int iter = 0;
  double max_dev = 0.0;    // max |alpha - 1| over measured columns
  double model_dev = 0.0;  // the same after projection on the front model
  double max_move = 0.0;
  double step = 0.0;
  int cg_iterations = 0;
};

struct FBSolution {
  GridField g;
  PlateState plate;
  std::vector<double> alpha;  // measured per column; NaN where unmeasured
  std::vector<FbIteration> log;
  bool converged = false;
  bool diverged = false;
  std::string report;
};

FBSolution solve_fb(const GridField& boundary, const PlateState& init, const SolverConfig& cfg = {});

/// Dirichlet energy over faces with midpoint in B_radius plus h^n times the number of plate
/// nodes in B_radius with v > 0.
double eval_energy(const GridField& v, double radius = 1.0);
/// The Dirichlet part alone.
double dirichlet_energy(const GridField& v, double radius = 1.0);

/// Flat CSV snapshot: index columns, coordinates, value.
void write_field_csv(std::ostream& os, const GridField& g);
/// JSON object with the front samples and run-length encoded phases per column.
std::string plate_json(const PlateState& plate);

}  // namespace thinfb
