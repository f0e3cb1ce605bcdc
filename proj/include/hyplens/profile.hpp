#pragma once

#include <array>
#include <string>
#include <vector>

namespace hyplens {

using Point = std::array<double, 2>;

/// Axis-aligned plane x_axis = position where a profile jumps or kinks.
struct Interface {
  int axis = 0;
  double position = 0.0;
  bool jump = true;  // false: value continuous, derivative jumps
};

/// Closed-form scalar field on ℝⁿ (n ≤ 2) used to build coefficients and data.
struct Profile {
  enum class Type { constant, step, ramp, tanh, gaussian, bump, kink2, sin_eps, lattice };
  Type type = Type::constant;
  int axis = 0;
  double base = 0.0;     // constant value / left state / offset
  double other = 0.0;    // right state / amplitude
  double x0 = 0.0;       // step position, ramp start, tanh center
  double x1 = 0.0;       // ramp end
  double width = 1.0;    // tanh/gaussian/bump/kink2 scale, lattice bump radius
  double spacing = 1.0;  // lattice spacing
  int count = 1;         // lattice bumps per axis
  Point center{0.0, 0.0};

  /// Value at x. ε only affects `sin_eps` (an explicitly ε-indexed net).
  double value(const Point& x, int n, double eps = 0.0) const;
  /// Gradient where it exists (one-sided value on jump/kink sets; a jump contributes no point mass).
  Point gradient(const Point& x, int n, double eps = 0.0) const;
  std::vector<Interface> interfaces() const;
  bool has_jump() const { return type == Type::step; }
  bool eps_dependent() const { return type == Type::sin_eps; }
  /// Sup of |value| over ℝⁿ (for sin_eps: uniform in ε).
  double sup_abs() const;
  /// Lipschitz constant in x, infinity for jumps and for sin_eps.
  double lipschitz() const;
  /// Radius of a ball containing the support of value − far-field value; infinity if not compact.
  double support_radius(int n) const;
  /// True when value vanishes outside support_radius.
  bool vanishes_at_infinity() const;
  std::string describe() const;
};

/// Scalar time factor multiplying a spatial coefficient.
struct TimeFactor {
  enum class Type { constant, sin, delta };
  Type type = Type::constant;
  double base = 1.0;   // constant value / sin offset / delta weight
  double amp = 0.0;
  double omega = 0.0;
  double t0 = 0.0;     // delta location

  bool is_constant() const { return type == Type::constant; }
  /// Pointwise value; a delta factor is reported as 0 away from t0 and +inf at t0.
  double rough_value(double t) const;
  /// Sup of |factor| over time, infinite for a delta.
  double sup_abs() const;
};

}  // namespace hyplens
