#pragma once

#include "hyplens/mollify.hpp"
#include "hyplens/system.hpp"

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyplens {

enum class Scheme { lax_friedrichs, upwind_split, lax_wendroff };
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);
/// Nominal order of accuracy in Δx for smooth solutions.
int nominal_order(Scheme s);

/// Raised when a run is aborted by the NaN/growth detector.
struct SchemeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat m-vector per node, node-major.
using GridField = std::vector<cplx>;

/// Multilinear interpolation of a node field at x, zero outside the grid.
CVec sample_field(const Grid& grid, const GridField& f, int m, const Point& x);
/// Discrete L² norm (midpoint over cells).
double field_l2(const Grid& grid, const GridField& f);

struct SolveOptions {
  Scheme scheme = Scheme::upwind_split;
  double cfl_limit = 0.9;
  std::vector<double> snapshot_times;     // must be step times; see plan_time
  size_t store_budget_bytes = 32u << 20;  // cap on stored frames
  double guard_tol = 1e-8;                // boundary-layer magnitude relative to the data scale
  bool guard_support = true;
  double growth_factor = 10.0;
};

/// Time-indexed grid solution with its norms and strong residual PU − F.
struct SolutionTrace {
  Grid grid;
  int m = 1;
  Scheme scheme = Scheme::upwind_split;
  double cfl = 0.0;
  double eps = 0.0;
  double T = 0.0;

  std::vector<double> step_times;  // t_k for every step, including 0 and T
  std::vector<double> step_l2;     // ‖U(t_k)‖_{L²}
  std::vector<double> frame_times;
  std::vector<GridField> frames;   // stored states
  std::vector<double> residual_times;
  std::vector<GridField> residuals;  // PU − F at step midpoints following stored frames
  std::vector<double> snapshot_times;
  std::vector<GridField> snapshots;
  double residual_l2 = 0.0;         // L²(Ω_T), every step
  std::vector<double> pu_l2_cum;     // ∫_0^{t_k} ‖PU‖² with PU = residual + F

  const GridField& final_state() const { return frames.back(); }
  /// State at (t, x), linear in time between stored frames.
  CVec state(double t, const Point& x) const;
  CVec residual(double t, const Point& x) const;
  /// State field at a stored time (nearest frame within 1e-12·T, else linear blend).
  GridField state_field(double t) const;
  /// ∫_0^t ‖PU(s)‖² ds, linear between steps.
  double pu_l2_squared(double t) const;
  /// ‖U(t)‖_{L²}, linear between steps.
  double l2_at(double t) const;
  /// ∫_0^t ‖U(s)‖² ds by the trapezoid rule over steps.
  double strip_l2_squared(double t) const;
  const GridField* snapshot(double t) const;
};

/// Sets Δt = T/steps with steps the smallest multiple of 4 keeping Δt·speed/Δx ≤ cfl.
Grid plan_time(Grid grid, double T, double speed, double cfl = 0.9,
               double max_dt = std::numeric_limits<double>::infinity());

/// Smallest half-width meeting support + T·speed + σ + 4Δx for N cells, padded by `pad`.
double auto_half_width(double support, double T, double speed, double sigma_max, int N, double pad = 1.1);

/// Solves the smooth problem of `reg` on its grid. The grid must carry Δt (see plan_time).
/// Throws RefusalError on CFL violation or boundary contact and SchemeFailure on blow-up.
SolutionTrace solve(const RegularizedSystem& reg, const SolveOptions& opt = {});

/// Scalar test field ψ(t, x).
using TestField = std::function<double(double t, const Point& x)>;

struct ResidualReport {
  double l2 = 0.0;                // ‖PU − F‖_{L²(Ω_T)}
  std::vector<double> pairings;   // |⟨PU − F, ψ_k⟩| over the stored residual frames
};
ResidualReport residual_norm(const SolutionTrace& trace, const std::vector<TestField>& battery = {});

/// Strong residual of an arbitrary space-time field (e.g. an exact solution) on the grid of `reg`.
/// Uses the same discrete operator as the solver with step Δt.
double residual_of(const RegularizedSystem& reg, const std::function<CVec(double, const Point&)>& U, double dt);

}  // namespace hyplens
