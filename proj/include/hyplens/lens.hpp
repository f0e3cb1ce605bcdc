#pragma once

#include "hyplens/linalg.hpp"
#include "hyplens/mollify.hpp"
#include "hyplens/profile.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hyplens {

/// Region ψ([0,1] × B_{R₂}) with a flat core of radius R₁ and a conical skirt reaching t = 0 at R₂.
struct Lens {
  int n = 1;
  double T = 1.0;
  double R1 = 1.0;
  double R2 = 2.0;

  /// Throws std::invalid_argument unless 0 < R₁ < R₂, T > 0, n ∈ {1,2}.
  static Lens make(int n, double T, double R1, double R2);
  /// Height profile h(y) ∈ [0,1]: 1 on the core, linear down to 0 at R₂.
  double height(const Point& y) const;
  double radius(const Point& y) const;
  std::string describe() const;
};

struct SpaceTime {
  double t = 0.0;
  Point x{0.0, 0.0};
};

/// ψ(Θ, y) = (Θ T h(y), y). Throws std::domain_error for |y| > R₂ or Θ ∉ [0,1].
SpaceTime lens_map(const Lens& lens, double theta, const Point& y);

/// R₁ + T(1 + 2√n C).
double min_outer_radius(double T, int n, double C, double R1);

/// Unit normal (ν⁰, ν¹, …, νⁿ) of the slice through x. Throws std::domain_error on the kink ring |x| = R₁.
std::vector<double> normal_field(const Lens& lens, double theta, const Point& x);

/// Surface density of the slice graph over the parameter point y.
double slice_density(const Lens& lens, double theta, const Point& y);

/// |det Dψ(Θ, y)| = T h(y).
double lens_jacobian(const Lens& lens, double theta, const Point& y);

/// Midpoint rule on the parameter cylinder; cells never straddle the kink ring.
struct LensQuadrature {
  int theta_cells = 64;
  int radial_cells = 256;   // split between core and skirt in proportion to their width
  int angular_cells = 128;  // n = 2 only
};

/// Parameter-space nodes y with their weights (∫ g dy ≈ Σ w g(y)).
struct ParamNode {
  Point y{0.0, 0.0};
  double w = 0.0;
};
std::vector<ParamNode> parameter_nodes(const Lens& lens, const LensQuadrature& q = {});

using ScalarField = std::function<double(double t, const Point& x)>;

/// ∫_{𝓗_Θ} |u| dS via the parameterization.
double integrate_slice(const ScalarField& u, const Lens& lens, double theta, const LensQuadrature& q = {});
/// ∫ over ψ([0, Θ_max] × B_{R₂}) of |u|.
double integrate_lens(const ScalarField& u, const Lens& lens, double theta_max = 1.0, const LensQuadrature& q = {});

/// Principal coefficient Aʲ(t, x).
using PrincipalEvaluator = std::function<CMat(int j, double t, const Point& x)>;

struct MarginResult {
  double margin = 0.0;
  bool pass = false;
  double tol = 0.0;
  SpaceTime witness;
  double witness_theta = 0.0;
  long samples = 0;
  bool radius_ok = true;  // R₂ ≥ min_outer_radius for the declared far-field bound
  std::string note;
};

/// min λ_min(ν⁰ I + Σ νʲ Aʲ) over a deterministic sample of the lens; pass iff ≥ 1/2 − tol.
MarginResult spacelike_margin(const Lens& lens, const PrincipalEvaluator& A, int m, int samples = 64,
                              double tol = 1e-9);
/// Same with the smoothed coefficients of `reg`; radius_ok checks the declared far-field bounds.
MarginResult spacelike_margin(const Lens& lens, const RegularizedSystem& reg, int samples = 64, double tol = 1e-9);

}  // namespace hyplens
