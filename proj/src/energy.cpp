#include "hyplens/energy.hpp"

#include <algorithm>
#include <cmath>

namespace hyplens {

namespace {

void finish(EnergyCertificate& c) {
  c.slack = c.rhs > 0.0 ? c.lhs / c.rhs : (c.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  c.pass = c.lhs <= c.rhs * (1.0 + c.tol);
}

}  // namespace

double alpha_lens(const RegularizedSystem& reg, const Lens& lens) {
  const Grid& g = reg.grid;
  const std::vector<double>& times = reg.ledger.times;
  double sup = 0.0;
  for (long q = 0; q < g.nodes(); ++q) {
    const Point x = g.point(q);
    if (lens.radius(x) >= lens.R2) continue;
    const double top = lens.T * lens.height(x);
    for (double t : times) {
      if (t > top) break;
      sup = std::max(sup, op_norm(reg.div_term(t, q)));
    }
  }
  return 1.0 + sup;
}

BetaProfile beta_profile(const RegularizedSystem& reg) {
  BetaProfile b;
  const Ledger& L = reg.ledger;
  const double T = reg.spec->T;
  b.times = L.times;
  for (double d : L.div_profile) b.beta.push_back(1.0 + d);
  if (b.times.size() == 1) {
    b.times.push_back(T);
    b.beta.push_back(b.beta[0]);
  }
  b.integral.assign(b.times.size(), 0.0);
  for (size_t k = 1; k < b.times.size(); ++k)
    b.integral[k] = b.integral[k - 1] + 0.5 * (b.times[k] - b.times[k - 1]) * (b.beta[k] + b.beta[k - 1]);
  return b;
}

double BetaProfile::integral_to(double t) const {
  if (t <= times.front()) return 0.0;
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.end()) return integral.back();
  const size_t k = static_cast<size_t>(it - times.begin()) - 1;
  const double w = (t - times[k]) / (times[k + 1] - times[k]);
  const double bt = beta[k] + w * (beta[k + 1] - beta[k]);
  return integral[k] + 0.5 * (t - times[k]) * (beta[k] + bt);
}

double gronwall_bound(double a, double alpha, double T, double theta) { return std::exp(2.0 * T * alpha * theta) * a; }

double gronwall_ode(double a, double C, double theta, int steps) {
  if (steps <= 0) steps = static_cast<int>(std::ceil(400.0 * std::max(1.0, C * theta)));
  const double h = theta / steps;
  double v = 0.0;
  auto f = [&](double y) { return a + C * y; };
  for (int k = 0; k < steps; ++k) {
    const double k1 = f(v), k2 = f(v + 0.5 * h * k1), k3 = f(v + 0.5 * h * k2), k4 = f(v + h * k3);
    v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return v;
}

double lens_energy_bound(double T, double alpha, double h0, double pu) {
  return 2.0 * T * std::exp(2.0 * T * alpha) * (h0 + pu);
}

double strip_energy_bound(double int_beta, double u0, double pu) { return std::exp(int_beta) * (u0 + pu); }

double certificate_tolerance(double dx, double dt, double alpha) { return 4.0 * (dx + dt) * (1.0 + alpha); }

EnergyCertificate certify_lens(const SolutionTrace& trace, const RegularizedSystem& reg, const Lens& lens,
                               const LensQuadrature& q) {
  EnergyCertificate c;
  c.flavor = "lens";
  c.eps = reg.eps;
  c.dx = trace.grid.dx;
  c.dt = trace.grid.dt;
  if (lens.T > trace.T + 1e-12) throw std::invalid_argument("lens is thicker than the computed time horizon");
  if (lens.R2 + 2.0 * trace.grid.dx > trace.grid.L) c.note = "lens reaches the grid boundary layer";
  const double alpha = alpha_lens(reg, lens);
  c.constant = alpha;
  const ScalarField u2 = [&](double t, const Point& x) { return trace.state(t, x).squaredNorm(); };
  const ScalarField pu2 = [&](double t, const Point& x) {
    return (trace.residual(t, x) + reg.interp(reg.F, t, x).col(0)).squaredNorm();
  };
  c.lhs = integrate_lens(u2, lens, 1.0, q);
  const double h0 = integrate_slice(u2, lens, 0.0, q);
  const double pu = integrate_lens(pu2, lens, 1.0, q);
  c.rhs = lens_energy_bound(lens.T, alpha, h0, pu);
  c.tol = certificate_tolerance(c.dx, c.dt, alpha);
  finish(c);
  return c;
}

EnergyCertificate certify_strip(const SolutionTrace& trace, const RegularizedSystem& reg, double t) {
  EnergyCertificate c;
  c.flavor = "strip";
  c.eps = reg.eps;
  c.t = t;
  c.dx = trace.grid.dx;
  c.dt = trace.grid.dt;
  const BetaProfile b = beta_profile(reg);
  c.constant = b.integral_to(t);
  const double u0 = trace.step_l2.front(), ut = trace.l2_at(t);
  c.lhs = ut * ut;
  c.rhs = strip_energy_bound(c.constant, u0 * u0, trace.pu_l2_squared(t));
  double alpha = 0.0;
  for (double v : b.beta) alpha = std::max(alpha, v);
  c.tol = t > 0.0 ? certificate_tolerance(c.dx, c.dt, alpha) : 0.0;
  finish(c);
  if (t == 0.0 && c.rhs > 0.0) c.slack = 1.0;
  return c;
}

}  // namespace hyplens
