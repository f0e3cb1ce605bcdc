#include "hyplens/profile.hpp"
#include "hyplens/scale_law.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hyplens {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double unit_bump(double r2) { return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0; }

double dist2(const Point& a, const Point& b, int n) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}
}  // namespace

double ScaleLaw::sigma(double eps) const {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("scale law needs 0 < eps < 1");
  switch (kind) {
    case LawKind::pure: return eps;
    case LawKind::log: return 1.0 / std::log(1.0 / eps);
    case LawKind::slow_scale: return 1.0 / std::pow(std::log(1.0 / eps), power);
  }
  return eps;
}

bool ScaleLaw::derivative_log_type() const {
  switch (kind) {
    case LawKind::pure: return false;
    case LawKind::log: return true;
    case LawKind::slow_scale: return power <= 1.0;
  }
  return false;
}

std::string ScaleLaw::name() const {
  switch (kind) {
    case LawKind::pure: return "pure";
    case LawKind::log: return "log";
    case LawKind::slow_scale: return "slow_scale";
  }
  return "?";
}

ScaleLaw parse_law(const std::string& kind, double power) {
  if (kind == "pure") return {LawKind::pure, power};
  if (kind == "log") return {LawKind::log, power};
  if (kind == "slow_scale") {
    if (!(power > 0.0)) throw std::invalid_argument("slow_scale law needs power > 0");
    return {LawKind::slow_scale, power};
  }
  throw std::invalid_argument("unknown scale law '" + kind + "'");
}

double Profile::value(const Point& x, int n, double eps) const {
  const double s = x[axis];
  switch (type) {
    case Type::constant: return base;
    case Type::step: return s < x0 ? base : other;
    case Type::ramp:
      if (s <= x0) return base;
      if (s >= x1) return other;
      return base + (other - base) * (s - x0) / (x1 - x0);
    case Type::tanh: return base + 0.5 * (other - base) * (1.0 + std::tanh((s - x0) / width));
    case Type::gaussian: return base + other * std::exp(-dist2(x, center, n) / (width * width));
    case Type::bump: return base + other * unit_bump(dist2(x, center, n) / (width * width));
    case Type::kink2: {
      const double u = (s - x0) / width;
      const double w = std::max(0.0, 1.0 - u * u);
      return base + other * w * w;
    }
    case Type::sin_eps:
      if (!(eps > 0.0)) throw std::domain_error("sin_eps profile evaluated without eps");
      return base + other * std::sin(s / eps);
    case Type::lattice: {
      double acc = base;
      const double half = 0.5 * (count - 1) * spacing;
      for (int i = 0; i < count; ++i) {
        for (int j = 0; j < (n == 2 ? count : 1); ++j) {
          Point c{center[0] - half + i * spacing, n == 2 ? center[1] - half + j * spacing : 0.0};
          acc += other * unit_bump(dist2(x, c, n) / (width * width));
        }
      }
      return acc;
    }
  }
  return 0.0;
}

Point Profile::gradient(const Point& x, int n, double eps) const {
  Point g{0.0, 0.0};
  const double s = x[axis];
  auto radial = [&](double amp, const Point& c, double w, bool gauss) {
    const double r2 = dist2(x, c, n) / (w * w);
    double f = 0.0;
    if (gauss) {
      f = -2.0 * amp * std::exp(-r2) / (w * w);
    } else if (r2 < 1.0) {
      const double d = 1.0 - r2;
      f = -2.0 * amp * unit_bump(r2) / (d * d * w * w);
    }
    for (int k = 0; k < n; ++k) g[k] += f * (x[k] - c[k]);
  };
  switch (type) {
    case Type::constant:
    case Type::step: break;
    case Type::ramp:
      if (s > x0 && s < x1) g[axis] = (other - base) / (x1 - x0);
      break;
    case Type::tanh: {
      const double th = std::tanh((s - x0) / width);
      g[axis] = 0.5 * (other - base) * (1.0 - th * th) / width;
      break;
    }
    case Type::gaussian: radial(other, center, width, true); break;
    case Type::bump: radial(other, center, width, false); break;
    case Type::kink2: {
      const double u = (s - x0) / width;
      if (std::abs(u) < 1.0) g[axis] = other * 2.0 * (1.0 - u * u) * (-2.0 * u) / width;
      break;
    }
    case Type::sin_eps: g[axis] = other * std::cos(s / eps) / eps; break;
    case Type::lattice: {
      const double half = 0.5 * (count - 1) * spacing;
      for (int i = 0; i < count; ++i)
        for (int j = 0; j < (n == 2 ? count : 1); ++j)
          radial(other, {center[0] - half + i * spacing, n == 2 ? center[1] - half + j * spacing : 0.0}, width, false);
      break;
    }
  }
  return g;
}

std::vector<Interface> Profile::interfaces() const {
  switch (type) {
    case Type::step: return {{axis, x0, true}};
    case Type::ramp: return {{axis, x0, false}, {axis, x1, false}};
    case Type::kink2: return {{axis, x0 - width, false}, {axis, x0 + width, false}};
    default: return {};
  }
}

double Profile::sup_abs() const {
  switch (type) {
    case Type::constant: return std::abs(base);
    case Type::step:
    case Type::ramp:
    case Type::tanh: return std::max(std::abs(base), std::abs(other));
    case Type::gaussian:
    case Type::bump:
    case Type::kink2:
    case Type::sin_eps:
    case Type::lattice: return std::abs(base) + std::abs(other);
  }
  return kInf;
}

double Profile::lipschitz() const {
  switch (type) {
    case Type::constant: return 0.0;
    case Type::step: return base == other ? 0.0 : kInf;
    case Type::ramp: return std::abs(other - base) / (x1 - x0);
    case Type::tanh: return 0.5 * std::abs(other - base) / width;
    case Type::gaussian: return std::abs(other) * std::sqrt(2.0 / std::exp(1.0)) / width;
    case Type::bump:
    case Type::lattice: return std::abs(other) * 2.2 / width;  // max slope of exp(1-1/(1-r²)) is 2.1704
    case Type::kink2: return std::abs(other) * 8.0 / (3.0 * std::sqrt(3.0) * width);
    case Type::sin_eps: return other == 0.0 ? 0.0 : kInf;
  }
  return kInf;
}

double Profile::support_radius(int n) const {
  const double c = std::sqrt(center[0] * center[0] + (n == 2 ? center[1] * center[1] : 0.0));
  switch (type) {
    case Type::constant: return 0.0;
    case Type::bump: return c + width;
    case Type::kink2: return n == 1 ? std::abs(x0) + width : kInf;
    case Type::lattice: return c + std::sqrt(double(n)) * 0.5 * (count - 1) * spacing + width;
    case Type::gaussian: return c + 7.0 * width;
    default: return kInf;
  }
}

bool Profile::vanishes_at_infinity() const {
  switch (type) {
    case Type::bump:
    case Type::kink2:
    case Type::lattice:
    case Type::gaussian: return base == 0.0;
    case Type::constant: return base == 0.0;
    default: return false;
  }
}

std::string Profile::describe() const {
  static const char* names[] = {"constant", "step", "ramp", "tanh", "gaussian", "bump", "kink2", "sin_eps", "lattice"};
  std::ostringstream os;
  os << names[static_cast<int>(type)];
  return os.str();
}

double TimeFactor::sup_abs() const {
  switch (type) {
    case Type::constant: return std::abs(base);
    case Type::sin: return std::abs(base) + std::abs(amp);
    case Type::delta: return kInf;
  }
  return kInf;
}

double TimeFactor::rough_value(double t) const {
  switch (type) {
    case Type::constant: return base;
    case Type::sin: return base + amp * std::sin(omega * t);
    case Type::delta: return t == t0 ? kInf : 0.0;
  }
  return 0.0;
}

}  // namespace hyplens
