#include "doctest.h"
#include "fixtures.hpp"
#include "generators.hpp"
#include "hyplens/energy.hpp"

#include <cmath>

using namespace hyplens;

namespace {

const Mollifier& moll1() {
  static const Mollifier m = Mollifier::make(1, 1);
  return m;
}

RegularizedSystem make_reg(std::shared_ptr<SystemSpec> spec, int N, double L, double eps = 0.25,
                           ScaleLaw law = {}, double max_dt = 1e9) {
  Grid g = plan_time(Grid::make(spec->n, N, L), spec->T, spec->principal_bound(), 0.9, max_dt);
  return regularize(spec, moll1(), law, eps, g);
}

}  // namespace

TEST_CASE("alpha of trivial and constant systems") {
  auto spec = fx::transport_1d(0.0, 1.0);
  spec->A[0] = CoefficientField::zero(1);
  spec->A[0].far_field = FarFieldBound{0, 0};
  const auto reg = make_reg(spec, 64, 2.0);
  CHECK(alpha_lens(reg, Lens::make(1, 1.0, 0.5, 1.5)) == 1.0);

  auto wave = fx::wave_1d(fx::constant(1.0), 1.0, CVec::Constant(2, 1.0));
  std::mt19937_64 rng(4);
  const CMat b = gen::random_hermitian(rng, 2);
  wave->B = CoefficientField::constant(b);
  const auto r2 = make_reg(wave, 64, 3.0);
  const double expect = 1.0 + 2.0 * Eigen::SelfAdjointEigenSolver<CMat>(b).eigenvalues().cwiseAbs().maxCoeff();
  CHECK(alpha_lens(r2, Lens::make(1, 1.0, 0.5, 2.5)) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("alpha grows like log(1/eps) for a log-scaled jump") {
  std::vector<double> x, y;
  for (int k = 4; k <= 10; ++k) {
    const double eps = std::ldexp(1.0, -k);
    auto spec = fx::wave_1d(fx::step(1.0, 2.0), 0.5, CVec::Constant(2, 1.0));
    const auto reg = make_reg(spec, 257, 3.0, eps, ScaleLaw{LawKind::log});
    x.push_back(std::log(1.0 / eps));
    y.push_back(alpha_lens(reg, Lens::make(1, 0.5, 0.5, 2.5)));
  }
  // Linear fit of α against log(1/ε): near-perfect line with positive slope.
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / x.size();
    my += y[i] / y.size();
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  CHECK(sxy / sxx > 0.1);
  CHECK(sxy * sxy / (sxx * syy) > 0.99);
}

TEST_CASE("beta profile examples") {
  auto spec = fx::transport_1d(0.0, 1.5);
  spec->A[0] = CoefficientField::zero(1);
  spec->A[0].far_field = FarFieldBound{0, 0};
  const auto b0 = beta_profile(make_reg(spec, 64, 2.0));
  CHECK(b0.integral_to(1.5) == doctest::Approx(1.5));
  CHECK(b0.beta.front() == 1.0);

  auto wave = fx::wave_1d(fx::constant(1.0), 1.0, CVec::Constant(2, 1.0));
  wave->B = CoefficientField::constant(CMat::Identity(2, 2) * 0.3);
  const auto b1 = beta_profile(make_reg(wave, 64, 3.0));
  for (double t : {0.0, 0.25, 0.7, 1.0}) CHECK(b1.integral_to(t) == doctest::Approx(t * 1.6));
}

TEST_CASE("impulsive damping keeps the integrated beta bounded in eps") {
  std::vector<double> ints, sups;
  for (int k = 3; k <= 8; ++k) {
    const double eps = std::ldexp(1.0, -k);
    auto spec = fx::transport_1d(1.0, 1.0);
    spec->B = CoefficientField::constant(fx::scalar(0.5));
    spec->B.time.type = TimeFactor::Type::delta;
    spec->B.time.t0 = 0.5;
    spec->data_class = DataClass::l2;
    spec->G.law = ScaleLaw{LawKind::log};
    const auto reg = make_reg(spec, 128, 2.5, eps, {}, eps / 4);
    ints.push_back(beta_profile(reg).integral_to(1.0));
    sups.push_back(reg.ledger.div_linf);
  }
  for (double v : ints) CHECK(v == doctest::Approx(1.0 + 2 * 0.5).epsilon(2e-3));
  CHECK(sups.back() / sups.front() == doctest::Approx(32.0).epsilon(1e-6));
}

TEST_CASE("Gronwall bound examples and ODE oracle") {
  CHECK(gronwall_bound(3.0, 2.0, 1.0, 0.0) == 3.0);
  CHECK(gronwall_bound(1.0, 1.0, 1.0, 1.0) == doctest::Approx(std::exp(2.0)).epsilon(1e-15));
  std::mt19937_64 rng(77);
  for (int k = 0; k < 100; ++k) {
    const double a = gen::uniform(rng, 0, 5), alpha = gen::uniform(rng, 1, 4), T = gen::uniform(rng, 0.1, 2);
    const double th = gen::uniform(rng, 0, 1), C = 2 * T * alpha;
    const double v = gronwall_ode(a, C, th);
    const double closed = (std::exp(C * th) - 1.0) * a / C;
    CHECK(std::abs(v - closed) <= 1e-8 * std::max(closed, 1e-300));
    CHECK(v <= gronwall_bound(a, alpha, T, th));
    // restarting from Θ₁ composes multiplicatively
    const double t1 = th * 0.4, t2 = th - t1;
    CHECK(gronwall_bound(gronwall_bound(a, alpha, T, t1), alpha, T, t2) >=
          gronwall_bound(a, alpha, T, th) * (1 - 1e-14));
  }
}

TEST_CASE("bounds are monotone in their constants") {
  std::mt19937_64 rng(78);
  for (int k = 0; k < 200; ++k) {
    const double T = gen::uniform(rng, 0.1, 2), a = gen::uniform(rng, 1, 3), h = gen::uniform(rng, 0, 1),
                 p = gen::uniform(rng, 0, 1), d = gen::uniform(rng, 0, 0.1);
    CHECK(lens_energy_bound(T + d, a, h, p) >= lens_energy_bound(T, a, h, p));
    CHECK(lens_energy_bound(T, a + d, h, p) >= lens_energy_bound(T, a, h, p));
    CHECK(strip_energy_bound(a + d, h, p) >= strip_energy_bound(a, h, p));
  }
}

TEST_CASE("zero data certifies trivially") {
  auto spec = fx::transport_1d(1.0, 0.5);
  spec->G = fx::zero_data(1);
  const auto reg = make_reg(spec, 128, 2.0);
  const auto tr = solve(reg);
  const auto lc = certify_lens(tr, reg, Lens::make(1, 0.5, 0.5, min_outer_radius(0.5, 1, 1.0, 0.5)));
  CHECK(lc.pass);
  CHECK(lc.lhs == 0.0);
  CHECK(lc.rhs == 0.0);
  CHECK(certify_strip(tr, reg, 0.5).pass);
}

TEST_CASE("transport certificates hold with slack and match translation") {
  auto spec = fx::transport_1d(1.0, 0.5);
  const auto reg = make_reg(spec, 512, 2.5);
  const auto tr = solve(reg);
  const auto s0 = certify_strip(tr, reg, 0.0);
  CHECK(s0.pass);
  CHECK(s0.slack == 1.0);
  const auto s = certify_strip(tr, reg, 0.5);
  CHECK(s.pass);
  CHECK(s.slack < 1.0);
  CHECK(tr.l2_at(0.5) <= tr.l2_at(0.0));

  const double R1 = 0.8;
  const Lens lens = Lens::make(1, 0.5, R1, min_outer_radius(0.5, 1, 1.0, R1));
  const auto c = certify_lens(tr, reg, lens);
  CHECK(c.pass);
  CHECK(c.slack < 1.0);
  CHECK(c.constant == doctest::Approx(1.0));
  // Oracle: exact translation of the initial grid profile integrated over the lens.
  const ScalarField exact = [&](double t, const Point& x) {
    return std::pow(sample_field(reg.grid, reg.G.data, 1, {x[0] - t, 0.0})(0).real(), 2);
  };
  CHECK(c.lhs == doctest::Approx(integrate_lens(exact, lens)).epsilon(0.02));
}

TEST_CASE("strip certificate with a source term") {
  auto spec = fx::transport_1d(1.0, 0.5);
  spec->F = fx::data(1, fx::bump(1.0, 0.3), CVec::Constant(1, 1.0));
  spec->B = CoefficientField::constant(fx::scalar(-0.4));
  const auto reg = make_reg(spec, 256, 2.5);
  const auto tr = solve(reg);
  for (double t : {0.125, 0.25, 0.5}) {
    const auto c = certify_strip(tr, reg, t);
    CHECK(c.pass);
    CHECK(c.constant == doctest::Approx(t * 1.8));
  }
}
