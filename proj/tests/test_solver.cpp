#include "doctest.h"
#include "fixtures.hpp"
#include "hyplens/solver.hpp"

#include <cmath>

using namespace hyplens;

namespace {

struct Run {
  RegularizedSystem reg;
  SolutionTrace trace;
};

Run run(std::shared_ptr<SystemSpec> spec, int N, double L, Scheme scheme, double eps = 0.25, double cfl = 0.9,
        std::vector<double> snaps = {}) {
  static const Mollifier m1 = Mollifier::make(1, 1);
  static const Mollifier m2 = Mollifier::make(2, 1);
  Grid g = plan_time(Grid::make(spec->n, N, L), spec->T, spec->principal_bound(), cfl);
  Run r{regularize(spec, spec->n == 1 ? m1 : m2, ScaleLaw{}, eps, g), {}};
  SolveOptions opt;
  opt.scheme = scheme;
  opt.snapshot_times = std::move(snaps);
  r.trace = solve(r.reg, opt);
  return r;
}

/// Smoothed initial profile G_ε = bump ∗ ρ_σ at a point, from the convolution primitive.
double g_eps(const SystemSpec& s, double sigma, const Point& x) {
  static const Mollifier m1 = Mollifier::make(1, 1);
  static const Mollifier m2 = Mollifier::make(2, 1);
  return convolve_profile(s.G.terms[0].profile, s.n == 1 ? m1 : m2, sigma, x, s.n).value;
}

double l2_error_1d(const Run& r, const std::function<CVec(const Point&)>& exact) {
  const Grid& g = r.reg.grid;
  const auto& u = r.trace.final_state();
  double e = 0.0;
  for (long q = 0; q < g.nodes(); ++q) {
    const CVec ex = exact(g.point(q));
    for (int k = 0; k < r.trace.m; ++k) e += std::norm(u[q * r.trace.m + k] - ex(k)) * g.cell_volume();
  }
  return std::sqrt(e);
}

double order(const std::vector<double>& errs) {
  std::vector<std::pair<double, double>> pts;
  for (size_t i = 0; i < errs.size(); ++i) pts.push_back({std::ldexp(1.0, -static_cast<int>(i)), errs[i]});
  // rate_fit needs 4 points; fall back to two-point slopes otherwise
  if (pts.size() >= 4) return rate_fit(pts).slope;
  return std::log2(errs[errs.size() - 2] / errs.back());
}

}  // namespace

TEST_CASE("scalar transport follows the translated smoothed datum at the nominal order") {
  for (Scheme s : {Scheme::upwind_split, Scheme::lax_wendroff, Scheme::lax_friedrichs}) {
    std::vector<double> errs;
    for (int N : {256, 512, 1024, 2048}) {
      auto spec = fx::transport_1d(1.0, 0.5, 0.5, -0.5);
      const Run r = run(spec, N, 2.0, s);
      errs.push_back(l2_error_1d(r, [&](const Point& x) {
        return CVec::Constant(1, g_eps(*spec, 0.25, {x[0] - 0.5, 0.0}));
      }));
    }
    INFO(to_string(s), " errors ", errs[0], " ", errs[3]);
    CHECK(order(errs) == doctest::Approx(nominal_order(s)).epsilon(0.3 / nominal_order(s)));
  }
}

TEST_CASE("wave system splits into left and right movers") {
  const double c = 1.5;
  std::vector<double> errs;
  for (int N : {256, 512, 1024, 2048}) {
    auto spec = fx::wave_1d(fx::constant(c), 0.5, (CVec(2) << 1.0, 0.0).finished());
    const Run r = run(spec, N, 2.5, Scheme::upwind_split);
    errs.push_back(l2_error_1d(r, [&](const Point& x) {
      const double a = g_eps(*spec, 0.25, {x[0] - c * 0.5, 0}), b = g_eps(*spec, 0.25, {x[0] + c * 0.5, 0});
      return (CVec(2) << 0.5 * (a + b), 0.5 * (a - b)).finished();
    }));
  }
  CHECK(errs.back() < 0.02);
  CHECK(order(errs) == doctest::Approx(1.0).epsilon(0.3));
}

TEST_CASE("discrete L2 norm is nonincreasing without lower-order terms") {
  for (Scheme s : {Scheme::upwind_split, Scheme::lax_friedrichs}) {
    auto spec = fx::wave_1d(fx::constant(1.0), 0.8, (CVec(2) << 1.0, 0.5).finished());
    const Run r = run(spec, 400, 2.5, s);
    for (size_t k = 1; k < r.trace.step_l2.size(); ++k) CHECK(r.trace.step_l2[k] <= r.trace.step_l2[k - 1] + 1e-12);
  }
}

TEST_CASE("CFL violation is refused with the required step") {
  auto spec = fx::transport_1d(2.0, 0.5);
  Grid g = plan_time(Grid::make(1, 200, 3.0), 0.5, 1.0, 0.9);  // planned for speed 1
  const auto reg = regularize(spec, Mollifier::make(1, 1), ScaleLaw{}, 0.25, g);
  try {
    solve(reg);
    FAIL("expected refusal");
  } catch (const RefusalError& e) {
    CHECK(e.required == doctest::Approx(0.9 * g.dx / 2.0));
  }
}

TEST_CASE("boundary contact is refused") {
  auto spec = fx::transport_1d(1.0, 2.0);
  Grid g = plan_time(Grid::make(1, 200, 2.0), 2.0, 1.0);
  RegularizeOptions ro;
  ro.check_extent = false;
  const auto reg = regularize(spec, Mollifier::make(1, 1), ScaleLaw{}, 0.25, g, ro);
  CHECK_THROWS_AS(solve(reg), RefusalError);
}

TEST_CASE("zero data gives a zero trace and residual") {
  auto spec = fx::transport_1d(1.0, 0.5);
  spec->G = fx::zero_data(1);
  const Run r = run(spec, 128, 2.0, Scheme::lax_wendroff);
  for (double v : r.trace.step_l2) CHECK(v == 0.0);
  CHECK(residual_norm(r.trace).l2 == 0.0);
}

TEST_CASE("constant damping scales the solution by exp(-bt)") {
  auto spec = fx::transport_1d(1.0, 0.5);
  spec->B = CoefficientField::constant(fx::scalar(0.7));
  const Run r = run(spec, 512, 2.0, Scheme::upwind_split);
  const auto& n = r.trace.step_l2;
  // Upwind dissipation is separate from damping: compare with the undamped run.
  auto plain = fx::transport_1d(1.0, 0.5);
  const Run q = run(plain, 512, 2.0, Scheme::upwind_split);
  CHECK(n.back() / q.trace.step_l2.back() == doctest::Approx(std::exp(-0.7 * 0.5)).epsilon(1e-12));
}

TEST_CASE("stationary source accumulates linearly") {
  auto spec = fx::transport_1d(0.0, 0.5);
  spec->A[0] = CoefficientField::zero(1);
  spec->A[0].far_field = FarFieldBound{0.0, 0.0};
  spec->F = fx::data(1, fx::bump(2.0, 0.4), CVec::Constant(1, 1.0));
  const Run r = run(spec, 128, 1.5, Scheme::upwind_split);
  const auto& u = r.trace.final_state();
  for (long q = 0; q < r.reg.grid.nodes(); ++q) {
    const double expect = r.reg.G.data[q].real() + 0.5 * r.reg.F.data[q].real();
    CHECK(std::abs(u[q].real() - expect) < 1e-13);
  }
}

TEST_CASE("impulsive source in time adds its weight once") {
  auto spec = fx::transport_1d(0.0, 1.0);
  spec->A[0] = CoefficientField::zero(1);
  spec->A[0].far_field = FarFieldBound{0.0, 0.0};
  spec->G = fx::zero_data(1);
  spec->F = fx::data(1, fx::bump(1.0, 0.4), CVec::Constant(1, 1.0));
  spec->F.time.type = TimeFactor::Type::delta;
  spec->F.time.base = 3.0;
  spec->F.time.t0 = 0.5;
  Grid g = plan_time(Grid::make(1, 128, 1.5), 1.0, 0.0, 0.9, 0.01);
  const auto reg = regularize(spec, Mollifier::make(1, 1), ScaleLaw{}, 0.25, g);
  const auto tr = solve(reg);
  for (long q = 0; q < g.nodes(); ++q) CHECK(std::abs(tr.final_state()[q] - 3.0 * reg.F.data[q]) < 1e-12);
}

TEST_CASE("injected exact solution has a consistent residual") {
  std::vector<double> res;
  for (int N : {128, 256, 512, 1024}) {
    auto spec = fx::transport_1d(1.0, 0.5, 0.5, -0.5);
    Grid g = plan_time(Grid::make(1, N, 2.0), 0.5, 1.0);
    const auto reg = regularize(spec, Mollifier::make(1, 1), ScaleLaw{}, 0.25, g);
    res.push_back(residual_of(
        reg, [&](double t, const Point& x) { return CVec::Constant(1, g_eps(*spec, 0.25, {x[0] - t, 0})); }, g.dt));
  }
  CHECK(res[3] < res[0]);
  CHECK(order(res) > 0.9);
}

TEST_CASE("finite propagation: support grows at most one speed step plus a cell per step") {
  auto spec = fx::transport_1d(1.0, 0.5, 0.3);
  const Run r = run(spec, 400, 2.0, Scheme::upwind_split, 0.25, 0.5);
  const Grid& g = r.reg.grid;
  auto extent = [&](const GridField& u) {
    double lo = 1e9, hi = -1e9;
    for (long q = 0; q < g.nodes(); ++q)
      if (u[q] != 0.0) {
        lo = std::min(lo, g.point(q)[0]);
        hi = std::max(hi, g.point(q)[0]);
      }
    return std::make_pair(lo, hi);
  };
  const auto e0 = extent(r.trace.frames.front());
  for (size_t f = 1; f < r.trace.frames.size(); ++f) {
    const int k = static_cast<int>(std::lround(r.trace.frame_times[f] / g.dt));
    const auto e = extent(r.trace.frames[f]);
    const double grow = k * (1.0 * g.dt + g.dx) + 1e-12;
    CHECK(e.first >= e0.first - grow);
    CHECK(e.second <= e0.second + grow);
  }
}

TEST_CASE("two-dimensional transport with dimension splitting") {
  std::vector<double> errs;
  for (int N : {60, 120, 240}) {
    auto spec = std::make_shared<SystemSpec>();
    spec->n = 2;
    spec->m = 1;
    spec->T = 0.4;
    spec->A = {CoefficientField::constant(fx::scalar(1.0)), CoefficientField::constant(fx::scalar(-0.5))};
    for (auto& a : spec->A) a.far_field = FarFieldBound{1.0, 0.0};
    spec->B = CoefficientField::zero(1);
    spec->F = fx::zero_data(1);
    spec->G = fx::data(1, fx::bump(1.0, 0.6), CVec::Constant(1, 1.0));
    const Run r = run(spec, N, 2.0, Scheme::lax_wendroff);
    const Grid& g = r.reg.grid;
    double e = 0.0;
    for (long q = 0; q < g.nodes(); ++q) {
      const Point x = g.point(q);
      const double ex = g_eps(*spec, 0.25, {x[0] - 0.4, x[1] + 0.2});
      e += std::norm(r.trace.final_state()[q] - ex) * g.cell_volume();
    }
    errs.push_back(std::sqrt(e));
  }
  CHECK(errs.back() < 5e-3);
  CHECK(std::log2(errs[1] / errs[2]) > 1.7);
}

TEST_CASE("transmission medium self-converges under refinement") {
  std::vector<GridField> finals;
  std::vector<Grid> grids;
  for (int N : {200, 400, 800, 1600}) {
    auto spec = fx::wave_1d(fx::step(1.0, 2.0), 0.5, (CVec(2) << 1.0, 0.0).finished(), 0.4);
    spec->G.terms[0].profile.center = {-0.6, 0.0};
    const Run r = run(spec, N, 3.0, Scheme::upwind_split, 0.25);
    finals.push_back(r.trace.final_state());
    grids.push_back(r.reg.grid);
  }
  auto dist = [&](int a, int b) {
    double e = 0.0;
    const Grid& g = grids[a];
    for (long q = 0; q < g.nodes(); ++q) {
      const CVec d = sample_field(grids[a], finals[a], 2, g.point(q)) - sample_field(grids[b], finals[b], 2, g.point(q));
      e += d.squaredNorm() * g.cell_volume();
    }
    return std::sqrt(e);
  };
  const double d1 = dist(0, 1), d2 = dist(1, 2), d3 = dist(2, 3);
  CHECK(std::log2(d1 / d2) > 0.8);
  CHECK(std::log2(d2 / d3) > 0.8);
}

TEST_CASE("snapshots, frames and strip integral") {
  auto spec = fx::transport_1d(1.0, 1.0);
  const Run r = run(spec, 256, 2.5, Scheme::upwind_split, 0.25, 0.9, {0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(r.trace.snapshots.size() == 5);
  REQUIRE(r.trace.snapshot(0.5) != nullptr);
  CHECK(field_l2(r.reg.grid, *r.trace.snapshot(1.0)) == doctest::Approx(r.trace.step_l2.back()));
  CHECK(r.trace.step_times.back() == 1.0);
  double trap = 0.0;
  for (size_t k = 0; k + 1 < r.trace.step_times.size(); ++k)
    trap += 0.5 * r.reg.grid.dt * (std::pow(r.trace.step_l2[k], 2) + std::pow(r.trace.step_l2[k + 1], 2));
  CHECK(r.trace.strip_l2_squared(1.0) == doctest::Approx(trap).epsilon(1e-12));
  CHECK(r.trace.strip_l2_squared(0.0) == 0.0);
  const CVec v = r.trace.state(0.5, {0.5, 0.0});
  CHECK(v(0).real() == doctest::Approx(sample_field(r.reg.grid, *r.trace.snapshot(0.5), 1, {0.5, 0})(0).real()));
}

TEST_CASE("residual pairings vanish for a smooth exact evolution") {
  auto spec = fx::transport_1d(1.0, 0.5);
  const Run coarse = run(spec, 256, 2.0, Scheme::lax_wendroff);
  const Run fine = run(spec, 1024, 2.0, Scheme::lax_wendroff);
  const TestField psi = [](double t, const Point& x) {
    const double r2 = (x[0] - 0.2) * (x[0] - 0.2) / 0.25 + (t - 0.25) * (t - 0.25) / 0.04;
    return r2 < 1 ? std::exp(-1.0 / (1 - r2)) : 0.0;
  };
  const double pc = residual_norm(coarse.trace, {psi}).pairings[0];
  const double pf = residual_norm(fine.trace, {psi}).pairings[0];
  CHECK(pf < pc);
  CHECK(pf < 1e-4);
}
