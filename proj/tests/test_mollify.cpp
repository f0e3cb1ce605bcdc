#include "doctest.h"
#include "fixtures.hpp"
#include "generators.hpp"
#include "hyplens/mollify.hpp"

#include <cmath>
#include <functional>

using namespace hyplens;

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, int n = 200000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Independent normalized 1D bump.
struct Bump1 {
  double z;
  Bump1() { z = simpson([](double x) { return raw(x); }, -1.0, 1.0); }
  static double raw(double x) { return std::abs(x) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - x * x)) : 0.0; }
  double operator()(double x, double s = 1.0) const { return raw(x / s) / (z * s); }
};

}  // namespace

TEST_CASE("mollifier normalization and moments") {
  for (int n : {1, 2}) {
    for (int mm : {1, 2, 3, 4, 5}) {
      const auto rho = Mollifier::make(n, mm);
      if (n == 1) {
        CHECK(std::abs(simpson([&](double x) { return rho.value({x, 0}); }, -1, 1) - 1.0) < 1e-10);
        for (int k = 1; k < mm; ++k) {
          const double mom = simpson([&](double x) { return std::pow(x, k) * rho.value({x, 0}); }, -1, 1);
          CHECK(std::abs(mom) < 1e-8);
        }
      } else {
        const double mass = simpson([&](double r) { return 2 * M_PI * r * rho.value({r, 0}); }, 0, 1);
        CHECK(std::abs(mass - 1.0) < 1e-10);
        if (mm >= 3) {
          // ∫ x₁² ρ = π ∫ r³ ρ(r) dr for a radial kernel
          const double m2 = simpson([&](double r) { return M_PI * r * r * r * rho.value({r, 0}); }, 0, 1);
          CHECK(std::abs(m2) < 1e-8);
        }
      }
      CHECK(rho.is_signed() == (mm >= 3));
      CHECK(rho.value({1.0, 0.0}) == 0.0);
      if (n == 2) CHECK(rho.value({0.8, 0.7}) == 0.0);
    }
  }
}

TEST_CASE("mollifier values agree with an independent bump") {
  const Bump1 b;
  const auto rho = Mollifier::make(1, 1);
  for (double x : {-0.9, -0.3, 0.0, 0.25, 0.7}) CHECK(rho.value({x, 0}) == doctest::Approx(b(x)).epsilon(1e-9));
  CHECK(rho.cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rho.cdf(0.4) == doctest::Approx(simpson([&](double x) { return b(x); }, -1, 0.4)).epsilon(1e-9));
}

TEST_CASE("Heaviside convolution is the kernel CDF and its derivative the kernel") {
  const Bump1 b;
  const auto rho = Mollifier::make(1, 1);
  const Profile h = fx::step(0.0, 1.0);
  for (double sigma : {0.5, 0.1, 0.01}) {
    for (double u : {-1.2, -0.6, -0.1, 0.0, 0.33, 0.9}) {
      const double x = u * sigma;
      const auto r = convolve_profile(h, rho, sigma, {x, 0}, 1);
      const double cdf = u <= -1 ? 0.0 : (u >= 1 ? 1.0 : simpson([&](double y) { return b(y); }, -1.0, u, 20000));
      CHECK(r.value == doctest::Approx(cdf).epsilon(1e-9));
      CHECK(std::abs(r.grad[0] - b(x, sigma)) < 1e-8 * b(0.0, sigma));
    }
  }
}

TEST_CASE("constant coefficients are left unchanged") {
  auto spec = fx::transport_1d(0.7, 0.5);
  spec->B = CoefficientField::constant(fx::scalar(0.3));
  const auto rho = Mollifier::make(1, 1);
  Grid g = Grid::make(1, 256, 3.0);
  const auto reg = regularize(spec, rho, {}, 0.1, g);
  for (long i = 0; i < g.nodes(); ++i) {
    CHECK(reg.A[0].at(i)(0, 0).real() == 0.7);
    CHECK(reg.B.at(i)(0, 0).real() == 0.3);
    CHECK(std::abs(reg.dA[0].at(i)(0, 0)) == 0.0);
  }
  CHECK(reg.ledger.div_linf == doctest::Approx(0.6));
}

TEST_CASE("zero system gives an all-zero ledger") {
  auto spec = std::make_shared<SystemSpec>();
  spec->n = 1;
  spec->m = 2;
  spec->A = {CoefficientField::zero(2)};
  spec->B = CoefficientField::zero(2);
  spec->F = fx::zero_data(2);
  spec->G = fx::zero_data(2);
  const auto reg = regularize(spec, Mollifier::make(1, 1), {}, 0.1, Grid::make(1, 64, 2.0));
  for (double v : reg.ledger.row()) CHECK(v == 0.0);
}

TEST_CASE("mass conservation and derivative transfer") {
  const auto rho = Mollifier::make(1, 1);
  const Grid g = Grid::make(1, 4096, 4.0);
  for (const Profile& p : {fx::ramp(0.0, 1.0, -1.0, 0.5), fx::bump(2.0, 1.3), fx::kink2(1.0, 1.5)}) {
    Profile q = p;
    if (p.type == Profile::Type::ramp) {  // compact: ramp up then cut by a step
      q = fx::kink2(1.0, 2.0);
    }
    const double sigma = 0.2;
    double mass_u = 0.0, mass_c = 0.0;
    std::vector<double> cv(g.N), cg(g.N);
    for (int i = 0; i < g.N; ++i) {
      const double x = g.coord(i);
      const auto r = convolve_profile(q, rho, sigma, {x, 0}, 1);
      cv[i] = r.value;
      cg[i] = r.grad[0];
      mass_c += r.value * g.dx;
    }
    mass_u = simpson([&](double x) { return q.value({x, 0}, 1); }, -4.0, 4.0, 400000);
    CHECK(std::abs(mass_c - mass_u) < 1e-8 * std::abs(mass_u));
    double worst = 0.0;
    for (int i = 1; i + 1 < g.N; ++i) worst = std::max(worst, std::abs((cv[i + 1] - cv[i - 1]) / (2 * g.dx) - cg[i]));
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("regularize refuses unresolved smoothing layers") {
  auto spec = fx::wave_1d(fx::step(1.0, 2.0), 0.5, CVec::Constant(2, 1.0));
  const auto rho = Mollifier::make(1, 1);
  const Grid g = Grid::make(1, 256, 4.0);  // dx = 1/32
  CHECK_THROWS_AS(regularize(spec, rho, {}, 1.0 / 64, g), RefusalError);
  try {
    regularize(spec, rho, {}, 1.0 / 64, g);
  } catch (const RefusalError& e) {
    CHECK(e.required == doctest::Approx(1.0 / 128));
  }
  CHECK_NOTHROW(regularize(spec, rho, {}, 1.0 / 16, g));
}

TEST_CASE("smoothed principal coefficients stay Hermitian") {
  std::mt19937_64 rng(3);
  const auto rho = Mollifier::make(1, 3);
  for (int trial = 0; trial < 5; ++trial) {
    auto spec = fx::wave_1d(fx::step(1.0, 2.0), 0.5, CVec::Constant(2, 1.0));
    spec->A[0].terms[0].matrix = gen::random_hermitian(rng, 2);
    spec->A[0].terms.push_back({fx::ramp(-1, 2, -0.5, 0.7), gen::random_hermitian(rng, 2)});
    spec->A[0].far_field.reset();
    RegularizeOptions opt;
    opt.check_extent = false;
    const auto reg = regularize(spec, rho, {}, 0.05, Grid::make(1, 512, 3.0), opt);
    for (long i = 0; i < reg.grid.nodes(); ++i) CHECK(hermitian_defect(reg.A[0].at(i)) < 1e-12);
  }
}

TEST_CASE("sup of the smoothed Heaviside derivative grows like 1/sigma") {
  auto spec = fx::wave_1d(fx::step(1.0, 2.0), 0.5, CVec::Constant(2, 1.0));
  const auto rho = Mollifier::make(1, 1);
  const Bump1 b;
  std::vector<std::pair<double, double>> pts;
  for (int k = 3; k <= 7; ++k) {
    const double eps = std::ldexp(1.0, -k);
    const int N = 16 * (1 << k) + 1;  // odd: a cell centre sits on the jump
    const Grid g = Grid::make(1, N, 4.0 * N / (N - 1));
    const auto reg = regularize(spec, rho, {}, eps, g);
    CHECK(reg.ledger.dA_sup[0] == doctest::Approx(b(0.0, eps)).epsilon(1e-8));
    pts.push_back({1.0 / eps, reg.ledger.dA_sup[0]});
  }
  const auto fit = rate_fit(pts);
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("delta-in-time lower order term: mixed norm bounded, sup norm ~ 1/eps") {
  auto spec = fx::transport_1d(1.0, 1.0);
  spec->B = CoefficientField::constant(fx::scalar(1.0));
  spec->B.time.type = TimeFactor::Type::delta;
  spec->B.time.base = 1.0;
  spec->B.time.t0 = 0.5;
  const auto rho = Mollifier::make(1, 1);
  std::vector<std::pair<double, double>> linf;
  for (int k = 3; k <= 7; ++k) {
    const double eps = std::ldexp(1.0, -k);
    const auto reg = regularize(spec, rho, {}, eps, Grid::make(1, 1024, 2.0));
    CHECK(reg.ledger.div_l1inf == doctest::Approx(2.0).epsilon(1e-3));
    linf.push_back({1.0 / eps, reg.ledger.div_linf});
  }
  CHECK(rate_fit(linf).slope == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("rate_fit examples") {
  std::vector<std::pair<double, double>> pts;
  for (int k = 2; k < 9; ++k) {
    const double s = std::ldexp(1.0, -k);
    pts.push_back({s, s * s});
  }
  const auto f = rate_fit(pts);
  CHECK(std::abs(f.slope - 2.0) < 1e-6);
  CHECK(f.r2 == doctest::Approx(1.0));
  std::vector<std::pair<double, double>> zeros{{0.5, 0}, {0.25, 0}, {0.125, 0}, {0.0625, 0}, {0.03, 0}};
  CHECK_THROWS_AS(rate_fit(zeros), RefusalError);
  pts[0].second = -1.0;
  pts[1].second = 0.0;
  CHECK(rate_fit(pts).used == 5);
  CHECK(rate_fit(pts).slope == doctest::Approx(2.0));
}

TEST_CASE("L-infinity approximation order of smoothed kinked fields") {
  const auto rho1 = Mollifier::make(1, 1);
  const auto rho2 = Mollifier::make(1, 2);
  const Profile lip = fx::ramp(0.0, 1.0, -0.5, 0.5);
  const Profile w2 = fx::kink2(1.0, 1.0);
  std::vector<std::pair<double, double>> e1, e2;
  for (int k = 4; k <= 10; ++k) {
    const double s = std::ldexp(1.0, -k);
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i <= 600; ++i) {  // sample set contains the kinks ±0.5, ±1
      const double x = -1.5 + 3.0 * i / 600.0;
      m1 = std::max(m1, std::abs(convolve_profile(lip, rho1, s, {x, 0}, 1).value - lip.value({x, 0}, 1)));
      m2 = std::max(m2, std::abs(convolve_profile(w2, rho2, s, {x, 0}, 1).value - w2.value({x, 0}, 1)));
    }
    e1.push_back({s, m1});
    e2.push_back({s, m2});
  }
  CHECK(rate_fit(e1).slope == doctest::Approx(1.0).epsilon(0.2));
  CHECK(rate_fit(e2).slope == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("scale laws") {
  const ScaleLaw pure{}, lg{LawKind::log}, slow{LawKind::slow_scale, 0.5};
  double prev_p = 1, prev_l = 1, prev_s = 1;
  for (double e : eps_grid()) {
    CHECK(pure.sigma(e) == e);
    CHECK(lg.sigma(e) == doctest::Approx(1.0 / std::log(1.0 / e)));
    CHECK(pure.sigma(e) < prev_p);
    CHECK(lg.sigma(e) < prev_l);
    CHECK(slow.sigma(e) < prev_s);
    prev_p = pure.sigma(e);
    prev_l = lg.sigma(e);
    prev_s = slow.sigma(e);
  }
  CHECK(eps_grid().size() == 11);
  CHECK_THROWS(pure.sigma(1.5));
}
