#include "hyplens/lens.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace hyplens {

namespace {

constexpr double kRingTol = 1e-14;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

/// Midpoints of `cells` equal cells on [a, b] with weight (b − a)/cells.
void midpoints(double a, double b, int cells, std::vector<double>& x, std::vector<double>& w) {
  const double h = (b - a) / cells;
  for (int i = 0; i < cells; ++i) {
    x.push_back(a + (i + 0.5) * h);
    w.push_back(h);
  }
}

}  // namespace

Lens Lens::make(int n, double T, double R1, double R2) {
  if (n != 1 && n != 2) throw std::invalid_argument("lens dimension must be 1 or 2");
  if (!(T > 0.0)) throw std::invalid_argument("lens thickness must be positive");
  if (!(R1 > 0.0) || !(R2 > R1)) throw std::invalid_argument("lens radii need 0 < R1 < R2");
  return Lens{n, T, R1, R2};
}

double Lens::radius(const Point& y) const { return n == 1 ? std::abs(y[0]) : std::hypot(y[0], y[1]); }

double Lens::height(const Point& y) const {
  const double r = radius(y);
  if (r <= R1) return 1.0;
  return std::max(0.0, (R2 - r) / (R2 - R1));
}

std::string Lens::describe() const {
  return "lens(n=" + std::to_string(n) + ", T=" + fmt(T) + ", R1=" + fmt(R1) + ", R2=" + fmt(R2) + ")";
}

SpaceTime lens_map(const Lens& lens, double theta, const Point& y) {
  if (theta < 0.0 || theta > 1.0) throw std::domain_error("lens parameter outside [0,1]");
  if (lens.radius(y) > lens.R2 * (1.0 + 1e-15)) throw std::domain_error("point outside the lens base");
  return {theta * lens.T * lens.height(y), y};
}

double min_outer_radius(double T, int n, double C, double R1) {
  return R1 + T * (1.0 + 2.0 * std::sqrt(static_cast<double>(n)) * C);
}

std::vector<double> normal_field(const Lens& lens, double theta, const Point& x) {
  const double r = lens.radius(x);
  if (std::abs(r - lens.R1) <= kRingTol * lens.R1) throw std::domain_error("normal requested on the kink ring");
  if (r >= lens.R2) throw std::domain_error("normal requested outside the open lens base");
  std::vector<double> nu(lens.n + 1, 0.0);
  if (r < lens.R1) {
    nu[0] = 1.0;
    return nu;
  }
  const double a = lens.R2 - lens.R1, b = theta * lens.T;
  const double d = std::hypot(a, b);
  nu[0] = a / d;
  for (int j = 0; j < lens.n; ++j) nu[j + 1] = b * x[j] / (r * d);
  return nu;
}

double slice_density(const Lens& lens, double theta, const Point& y) {
  const double r = lens.radius(y);
  if (std::abs(r - lens.R1) <= kRingTol * lens.R1) throw std::domain_error("density requested on the kink ring");
  if (r < lens.R1) return 1.0;
  // |∇_y t| = ΘT/(R₂−R₁) on the skirt in every dimension.
  const double g = theta * lens.T / (lens.R2 - lens.R1);
  return std::sqrt(1.0 + g * g);
}

double lens_jacobian(const Lens& lens, double, const Point& y) { return lens.T * lens.height(y); }

std::vector<ParamNode> parameter_nodes(const Lens& lens, const LensQuadrature& q) {
  const double core = lens.R1;
  const int rc = std::max(1, static_cast<int>(std::lround(q.radial_cells * core / lens.R2)));
  const int rs = std::max(1, q.radial_cells - rc);
  std::vector<ParamNode> out;
  if (lens.n == 1) {
    std::vector<double> x, w;
    midpoints(-lens.R2, -lens.R1, (rs + 1) / 2, x, w);
    midpoints(-lens.R1, lens.R1, 2 * ((rc + 1) / 2), x, w);
    midpoints(lens.R1, lens.R2, (rs + 1) / 2, x, w);
    for (size_t i = 0; i < x.size(); ++i) out.push_back({{x[i], 0.0}, w[i]});
    return out;
  }
  std::vector<double> r, wr, phi, wp;
  midpoints(0.0, core, rc, r, wr);
  midpoints(core, lens.R2, rs, r, wr);
  midpoints(0.0, 2.0 * std::numbers::pi, q.angular_cells, phi, wp);
  for (size_t i = 0; i < r.size(); ++i)
    for (size_t k = 0; k < phi.size(); ++k)
      out.push_back({{r[i] * std::cos(phi[k]), r[i] * std::sin(phi[k])}, r[i] * wr[i] * wp[k]});
  return out;
}

double integrate_slice(const ScalarField& u, const Lens& lens, double theta, const LensQuadrature& q) {
  double acc = 0.0;
  for (const auto& p : parameter_nodes(lens, q)) {
    const SpaceTime z = lens_map(lens, theta, p.y);
    acc += p.w * std::abs(u(z.t, z.x)) * slice_density(lens, theta, p.y);
  }
  return acc;
}

double integrate_lens(const ScalarField& u, const Lens& lens, double theta_max, const LensQuadrature& q) {
  std::vector<double> th, wt;
  midpoints(0.0, theta_max, q.theta_cells, th, wt);
  const auto nodes = parameter_nodes(lens, q);
  double acc = 0.0;
  for (size_t k = 0; k < th.size(); ++k)
    for (const auto& p : nodes) {
      const SpaceTime z = lens_map(lens, th[k], p.y);
      acc += wt[k] * p.w * std::abs(u(z.t, z.x)) * lens_jacobian(lens, th[k], p.y);
    }
  return acc;
}

MarginResult spacelike_margin(const Lens& lens, const PrincipalEvaluator& A, int m, int samples, double tol) {
  MarginResult res;
  res.tol = tol;
  res.margin = std::numeric_limits<double>::infinity();
  LensQuadrature q;
  q.radial_cells = std::max(4, samples);
  q.angular_cells = std::max(4, samples / 2);
  const auto nodes = parameter_nodes(lens, q);
  std::vector<double> thetas;
  for (int k = 0; k < samples; ++k) thetas.push_back((k + 0.5) / samples);
  thetas.push_back(1.0);
  for (double th : thetas) {
    for (const auto& p : nodes) {
      const SpaceTime z = lens_map(lens, th, p.y);
      const auto nu = normal_field(lens, th, z.x);
      CMat sym = nu[0] * CMat::Identity(m, m);
      for (int j = 0; j < lens.n; ++j)
        if (nu[j + 1] != 0.0) sym += nu[j + 1] * A(j, z.t, z.x);
      const double lm = lambda_min(sym);
      ++res.samples;
      if (lm < res.margin) {
        res.margin = lm;
        res.witness = z;
        res.witness_theta = th;
      }
    }
  }
  res.pass = res.margin >= 0.5 - tol;
  return res;
}

MarginResult spacelike_margin(const Lens& lens, const RegularizedSystem& reg, int samples, double tol) {
  const PrincipalEvaluator ev = [&reg](int j, double t, const Point& x) { return reg.interp(reg.A[j], t, x); };
  MarginResult res = spacelike_margin(lens, ev, reg.m(), samples, tol);
  double C = 0.0;
  bool declared = true;
  for (const auto& a : reg.spec->A) {
    if (!a.far_field || a.far_field->R_A > lens.R1) {
      declared = false;
      break;
    }
    C = std::max(C, a.far_field->C);
  }
  if (!declared) {
    res.note = "no far-field bound valid beyond R1; outer radius not checked";
  } else {
    const double need = min_outer_radius(lens.T, lens.n, C, lens.R1);
    res.radius_ok = lens.R2 >= need - 1e-12;
    if (!res.radius_ok) res.note = "R2 = " + fmt(lens.R2) + " below the admissible " + fmt(need);
  }
  return res;
}

}  // namespace hyplens
