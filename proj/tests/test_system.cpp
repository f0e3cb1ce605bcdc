#include "doctest.h"
#include "fixtures.hpp"
#include "generators.hpp"
#include "hyplens/system.hpp"

using namespace hyplens;

namespace {
const HypothesisCheck& find(const ValidationReport& r, const std::string& id) {
  for (const auto& c : r.checks)
    if (c.id == id) return c;
  throw std::runtime_error("missing check " + id);
}
}  // namespace

TEST_CASE("constant scalar advection satisfies every T3.1 hypothesis") {
  auto spec = fx::transport_1d(1.0, 1.0);
  spec->A[0].far_field = FarFieldBound{1.0, 0.0};
  const auto rep = validate_hypotheses(*spec, Theorem::T31);
  CHECK(rep.structural_ok);
  CHECK(rep.all_pass());
  CHECK(find(rep, "iii").status == Status::satisfied);
}

TEST_CASE("missing far-field bound flags iii and suggests T3.2") {
  auto spec = fx::transport_1d(1.0, 1.0);
  spec->A[0].far_field.reset();
  const auto rep = validate_hypotheses(*spec, Theorem::T31);
  CHECK(find(rep, "iii").status == Status::violated);
  CHECK(rep.suggestion.find("T3.2") != std::string::npos);
  CHECK_FALSE(rep.all_pass());
}

TEST_CASE("skew-Hermitian B has a vanishing Hermitian part") {
  auto spec = fx::wave_1d(fx::constant(1.0), 1.0, CVec::Constant(2, 1.0));
  CMat skew(2, 2);
  skew << 0, 1, -1, 0;
  spec->B = CoefficientField::constant(skew);
  for (Theorem t : {Theorem::T31, Theorem::T32, Theorem::T33}) {
    spec->data_class = t == Theorem::T31 ? DataClass::general : (t == Theorem::T32 ? DataClass::linf : DataClass::l2);
    const auto rep = validate_hypotheses(*spec, t);
    const auto& ii = rep.checks[2];
    CHECK(ii.status == Status::satisfied);
    CHECK(ii.evidence.find("vanishes") != std::string::npos);
  }
}

TEST_CASE("non-Hermitian principal coefficient is a structural rejection") {
  auto spec = fx::wave_1d(fx::constant(1.0), 1.0, CVec::Constant(2, 1.0));
  CMat bad(2, 2);
  bad << 0, 1, 0, 0;
  spec->A[0] = fx::coef(fx::constant(1.0), bad);
  const auto rep = validate_hypotheses(*spec, Theorem::T31);
  CHECK_FALSE(rep.structural_ok);
  CHECK(rep.structural_message.find("A1") != std::string::npos);
  CHECK(rep.structural_message.find("x=") != std::string::npos);
}

TEST_CASE("jump coefficients need the log scale law for log-type derivatives") {
  auto spec = fx::wave_1d(fx::step(1.0, 2.0), 1.0, CVec::Constant(2, 1.0));
  CHECK(find(validate_hypotheses(*spec, Theorem::T31), "ii").status == Status::violated);
  CHECK(find(validate_hypotheses(*spec, Theorem::T31, ScaleLaw{LawKind::log}), "ii").status == Status::satisfied);
  spec->A[0].law = ScaleLaw{LawKind::slow_scale, 2.0};
  CHECK(find(validate_hypotheses(*spec, Theorem::T31), "ii").status == Status::violated);
}

TEST_CASE("delta-in-time B fits T3.3 but not T3.1") {
  auto spec = fx::transport_1d(1.0, 1.0);
  spec->B = CoefficientField::constant(fx::scalar(1.0));
  spec->B.time.type = TimeFactor::Type::delta;
  spec->B.time.t0 = 0.5;
  spec->data_class = DataClass::l2;
  CHECK(find(validate_hypotheses(*spec, Theorem::T31), "ii").status == Status::violated);
  const auto r33 = validate_hypotheses(*spec, Theorem::T33);
  CHECK(find(r33, "ii''").status == Status::satisfied);
  CHECK(r33.all_pass());
}

TEST_CASE("data class must match the theorem") {
  auto spec = fx::transport_1d(1.0, 1.0);
  spec->data_class = DataClass::general;
  CHECK(find(validate_hypotheses(*spec, Theorem::T32), "i'").status == Status::violated);
  spec->data_class = DataClass::linf;
  CHECK(find(validate_hypotheses(*spec, Theorem::T32), "i'").status == Status::satisfied);
}

TEST_CASE("far-field sampling catches a bound that is too small") {
  auto spec = fx::wave_1d(fx::step(1.0, 3.0), 1.0, CVec::Constant(2, 1.0));
  spec->A[0].far_field = FarFieldBound{2.0, 1.0};
  const auto& iii = find(validate_hypotheses(*spec, Theorem::T31), "iii");
  CHECK(iii.status == Status::violated);
  CHECK(iii.evidence.find("x=") != std::string::npos);
}

TEST_CASE("Hermitian principal coefficients sampled on random points") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto spec = fx::wave_1d(fx::step(1.0, 2.0), 1.0, CVec::Constant(2, 1.0));
    spec->A[0].terms.push_back({fx::ramp(0, 1, -1, 1), gen::random_hermitian(rng, 2)});
    const auto w = sample_hermitian_defect(*spec, 7, 1000, 5.0);
    CHECK(w.defect < 1e-12);
  }
}

TEST_CASE("shape checks") {
  auto spec = fx::transport_1d(1.0, 1.0);
  spec->T = 0.0;
  CHECK_THROWS_AS(spec->check_shapes(), std::invalid_argument);
  spec = fx::transport_1d(1.0, 1.0);
  spec->n = 3;
  CHECK_THROWS_AS(spec->check_shapes(), std::invalid_argument);
}
