#pragma once

#include "hyplens/linalg.hpp"
#include "hyplens/profile.hpp"
#include "hyplens/scale_law.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyplens {

/// Raised when a system fails a structural requirement (e.g. non-Hermitian principal part).
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FarFieldBound {
  double C = 0.0;    // bound on ‖Aʲ‖_op
  double R_A = 0.0;  // valid for |x| > R_A
};

/// One summand profile(x)·matrix of a coefficient.
struct CoefTerm {
  Profile profile;
  CMat matrix;
};

/// Rough matrix coefficient Σ_k profile_k(x)·M_k scaled by a time factor.
struct CoefficientField {
  enum class Kind { smooth, piecewise, lattice };

  int m = 1;
  std::vector<CoefTerm> terms;
  TimeFactor time;
  std::optional<ScaleLaw> law;  // falls back to the regularization default
  std::optional<FarFieldBound> far_field;

  static CoefficientField zero(int m);
  static CoefficientField constant(const CMat& value);

  Kind kind() const;
  bool is_zero() const { return terms.empty(); }
  bool eps_dependent() const;
  bool time_dependent() const { return !time.is_constant(); }
  /// Spatial part only (time factor omitted).
  CMat spatial(const Point& x, int n, double eps = 0.0) const;
  /// Full rough evaluation at (t, x).
  CMat eval(double t, const Point& x, int n, double eps = 0.0) const;
  std::vector<Interface> interfaces() const;
  /// Declared sup of ‖·‖_op over space (time factor excluded), from the term bounds.
  double sup_bound() const;
  double lipschitz_bound() const;
};

/// Point mass weight·δ(x − center).
struct DeltaTerm {
  Point center{0.0, 0.0};
  CVec vector;
};

struct DataTerm {
  Profile profile;
  CVec vector;
};

/// Rough vector data Σ profile_k(x) v_k + Σ δ terms, scaled by ε^eps_power and a time factor.
struct DataField {
  int m = 1;
  std::vector<DataTerm> terms;
  std::vector<DeltaTerm> deltas;
  double eps_power = 0.0;
  TimeFactor time;
  std::optional<ScaleLaw> law;

  bool is_zero() const { return terms.empty() && deltas.empty(); }
  CVec spatial(const Point& x, int n, double eps = 0.0) const;  // δ terms excluded
  std::vector<Interface> interfaces() const;
  double support_radius(int n) const;
};

enum class DataClass { general, linf, l2 };
enum class Theorem { T31, T32, T33 };

std::string to_string(DataClass c);
std::string to_string(Theorem t);
DataClass parse_data_class(const std::string& s);
Theorem parse_theorem(const std::string& s);

struct SystemSpec {
  std::string name;
  int n = 1;
  int m = 1;
  double T = 1.0;
  std::vector<CoefficientField> A;
  CoefficientField B;
  DataField F;
  DataField G;
  DataClass data_class = DataClass::general;

  /// Throws std::invalid_argument on shape/range errors.
  void check_shapes() const;
  /// Declared sup over space of max_j ‖Aʲ‖_op.
  double principal_bound() const;
};

/// Uniform cell-centred grid on [−L, L]ⁿ with N cells per axis.
struct Grid {
  int n = 1;
  int N = 0;
  double L = 1.0;
  double dx = 0.0;
  double dt = 0.0;
  int steps = 0;

  static Grid make(int n, int N, double L);
  long nodes() const { return n == 1 ? N : static_cast<long>(N) * N; }
  double coord(int i) const { return -L + (i + 0.5) * dx; }
  Point point(long idx) const {
    if (n == 1) return {coord(static_cast<int>(idx)), 0.0};
    return {coord(static_cast<int>(idx / N)), coord(static_cast<int>(idx % N))};
  }
  double cell_volume() const { return n == 1 ? dx : dx * dx; }
  /// Stride of the flat node index along an axis.
  long stride(int axis) const { return (n == 2 && axis == 0) ? N : 1; }
  /// Δt·max_speed/Δx.
  double cfl(double max_speed) const { return dt * max_speed / dx; }
};

enum class Status { satisfied, violated, not_checkable };
std::string to_string(Status s);

struct HypothesisCheck {
  std::string id;
  std::string statement;
  Status status = Status::not_checkable;
  std::string evidence;
};

struct ValidationReport {
  Theorem theorem = Theorem::T31;
  bool structural_ok = true;
  std::string structural_message;
  std::vector<HypothesisCheck> checks;
  std::string suggestion;

  bool all_pass() const;
};

/// Checks the hypothesis set of the requested theorem on the representative nets the artifact builds.
/// Structural defects (non-Hermitian principal part) are reported with structural_ok = false.
ValidationReport validate_hypotheses(const SystemSpec& spec, Theorem theorem, const ScaleLaw& default_law = {},
                                     unsigned seed = 1234, int samples = 1000);

/// Largest Hermitian defect of the principal coefficients over random samples, with the witness.
struct HermitianSample {
  double defect = 0.0;
  int axis = 0;
  Point x{0.0, 0.0};
};
HermitianSample sample_hermitian_defect(const SystemSpec& spec, unsigned seed, int samples, double radius);

}  // namespace hyplens
