#pragma once

#include "hyplens/energy.hpp"
#include "hyplens/scenario.hpp"
#include "hyplens/solver.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace hyplens {

/// ‖∂_t^l ∇ʳ U‖_{L²}, reported as the sup over the snapshot times.
struct NormKey {
  int r = 0;
  int l = 0;
  std::string name() const;  // norm_r{r}_l{l}
};
std::vector<NormKey> tracked_keys(int order);

/// Tensor bump ψ(t, x) with unit integral over its support.
struct BumpTest {
  double t0 = 0.0;
  double rt = 1.0;
  Point x0{0.0, 0.0};
  double rx = 1.0;
  int n = 1;
  double scale = 1.0;

  double value(double t, const Point& x) const;
  double dt(double t, const Point& x) const;
  double dx(int axis, double t, const Point& x) const;
};
/// `count` bumps with seeded centres inside [0, T] × B_radius.
std::vector<BumpTest> make_battery(int n, double T, double radius, unsigned seed, int count = 5);

using Candidate = std::function<CVec(double t, const Point& x)>;
/// |⟨∂_t U + Σ Aʲ ∂_j U + B U − F, ψ⟩| with derivatives moved onto ψ and the rough coefficients
/// evaluated pointwise (ε only enters ε-indexed profiles). Delta time factors and point-mass
/// sources are not supported.
std::vector<double> weak_pairings(const SystemSpec& spec, const Candidate& u, const std::vector<BumpTest>& battery,
                                  double eps = 0.0, int points = 24);

struct SweepRow {
  double eps = 0.0;
  double sigma = 0.0;
  bool ok = false;
  std::string cause;
  Ledger ledger;
  double alpha = 0.0;     // α over the configured lens, 0 without one
  double beta_int = 0.0;  // ∫_0^T β
  double coupling = 0.0;  // ‖A_ε − A₀‖_∞ · max(‖∂B_ε‖_∞, ‖G_ε‖_{H¹}, ‖F_ε‖_{L²})
  std::map<std::string, double> norms;
  std::vector<EnergyCertificate> certs;
  std::vector<double> pairings;
  std::vector<GridField> snapshots;  // at SweepReport::snapshot_times on the report grid
  double seconds = 0.0;

  bool certified() const;
};

struct FitResult {
  double N = 0.0;
  double raw_slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int used = 0;
  bool indeterminate = false;
};

enum class GrowthKind { log_type, bounded, polynomial, indeterminate };
struct Classification {
  GrowthKind kind = GrowthKind::indeterminate;
  double N = 0.0;  // polynomial exponent
  double res_const = 0.0;
  double res_log = 0.0;
  double res_pow = 0.0;
  std::string label() const;
};

struct CauchyResult {
  std::vector<double> distances;  // d_k between rows k and k+1 (valid rows only)
  double ratio = 0.0;             // geometric-mean ratio over the tail
  bool cauchy = false;
  double tail = 0.0;              // error bar of the limit
  std::string reason;
  double limit_eps = 0.0;
  std::vector<GridField> limit;   // U₀ candidate at the snapshot times
};

struct WeakResult {
  bool run = false;
  bool pass = false;
  double scale = 0.0;
  double tolerance = 0.0;
  std::vector<double> final;  // pairings at the finest valid ε
  double worst = 0.0;
  int worst_field = -1;
  std::string note;
};

struct Uniformity {
  double N00 = 0.0;
  double max_N = 0.0;
  bool bounded = false;  // every N(r,l) within 0.25 of N(0,0)
};

struct SweepReport {
  std::string scenario;
  unsigned seed = 0;
  Grid grid;
  std::vector<double> snapshot_times;
  std::vector<std::string> norm_keys;
  std::vector<BumpTest> battery;
  std::vector<SweepRow> rows;  // ε decreasing

  std::map<std::string, FitResult> fits;
  std::map<std::string, Classification> classes;
  CauchyResult cauchy;
  WeakResult weak;
  Uniformity uniformity;
  double coupling_slope = 0.0;

  /// Every numeric column of a row, in CSV order.
  std::vector<std::string> columns() const;
  std::vector<double> values(const SweepRow& row) const;
  /// Rows usable for fits: completed with passing certificates.
  std::vector<const SweepRow*> valid_rows() const;
  /// (ε, value) pairs of one column over the valid rows.
  std::vector<std::pair<double, double>> series(const std::string& column) const;
  bool all_ok() const;
};

/// Grid and battery shared by every ε of a sweep.
struct SweepPlan {
  Grid grid;
  std::vector<double> snapshot_times;
  std::vector<BumpTest> battery;
  std::vector<NormKey> keys;
};
SweepPlan plan_sweep(const Scenario& sc, const std::vector<double>& eps);

/// One pure ε job. Failures are recorded in the row, never thrown.
SweepRow run_eps(const Scenario& sc, const SweepPlan& plan, double eps);

struct SweepOptions {
  int jobs = 1;
  std::vector<SweepRow> completed;               // rows reused instead of recomputed (matched by ε)
  std::function<void(const SweepRow&)> on_row;   // called on the calling thread as jobs finish
};
SweepReport run_sweep(const Scenario& sc, const std::vector<double>& eps, const SweepOptions& opt = {});

/// Fits, classifications, Cauchy and weak checks from the rows.
void analyze(SweepReport& rep);

/// Slope of log(value) against log(1/ε); N = max(slope, 0). Needs ≥ 4 positive values.
FitResult fit_moderateness(const std::vector<std::pair<double, double>>& series);
FitResult fit_moderateness(const SweepReport& rep, const std::string& key);
/// Best of constant, a + c·log(1/ε) and c·ε^{−N} by relative residual, with a 10% dominance margin.
Classification classify_log_type(const std::vector<std::pair<double, double>>& series);
Classification classify_log_type(const SweepReport& rep, const std::string& key);
CauchyResult cauchy_net_check(const SweepReport& rep);
WeakResult weak_solution_check(const SweepReport& rep);

std::string to_string(GrowthKind k);

}  // namespace hyplens
