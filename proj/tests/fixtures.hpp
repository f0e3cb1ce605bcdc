#pragma once

#include "hyplens/mollify.hpp"
#include "hyplens/system.hpp"

#include <memory>

namespace fx {

using namespace hyplens;

inline Profile constant(double v) {
  Profile p;
  p.type = Profile::Type::constant;
  p.base = v;
  return p;
}

inline Profile step(double left, double right, double at = 0.0, int axis = 0) {
  Profile p;
  p.type = Profile::Type::step;
  p.base = left;
  p.other = right;
  p.x0 = at;
  p.axis = axis;
  return p;
}

inline Profile ramp(double left, double right, double x0, double x1) {
  Profile p;
  p.type = Profile::Type::ramp;
  p.base = left;
  p.other = right;
  p.x0 = x0;
  p.x1 = x1;
  return p;
}

inline Profile bump(double amp, double width, Point c = {0.0, 0.0}) {
  Profile p;
  p.type = Profile::Type::bump;
  p.other = amp;
  p.width = width;
  p.center = c;
  return p;
}

inline Profile kink2(double amp, double width) {
  Profile p;
  p.type = Profile::Type::kink2;
  p.other = amp;
  p.width = width;
  return p;
}

inline CMat scalar(double v) { return CMat::Constant(1, 1, v); }

inline CMat wave_matrix() {
  CMat k(2, 2);
  k << 0, 1, 1, 0;
  return k;
}

inline CoefficientField coef(const Profile& p, const CMat& m) {
  CoefficientField c;
  c.m = static_cast<int>(m.rows());
  c.terms.push_back({p, m});
  return c;
}

inline DataField data(int m, const Profile& p, const CVec& v) {
  DataField d;
  d.m = m;
  d.terms.push_back({p, v});
  return d;
}

inline DataField zero_data(int m) {
  DataField d;
  d.m = m;
  return d;
}

/// ∂_t u + a ∂_x u = 0, G = bump(width) centred at c.
inline std::shared_ptr<SystemSpec> transport_1d(double a, double T, double width = 0.5, double c = 0.0) {
  auto s = std::make_shared<SystemSpec>();
  s->name = "transport";
  s->n = 1;
  s->m = 1;
  s->T = T;
  s->A = {CoefficientField::constant(scalar(a))};
  s->A[0].far_field = FarFieldBound{std::abs(a), 0.0};
  s->B = CoefficientField::zero(1);
  s->F = zero_data(1);
  s->G = data(1, bump(1.0, width, {c, 0.0}), CVec::Constant(1, 1.0));
  return s;
}

/// u_t + c w_x = 0, w_t + c u_x = 0 with speed profile c(x).
inline std::shared_ptr<SystemSpec> wave_1d(const Profile& speed, double T, const CVec& g, double width = 0.5) {
  auto s = std::make_shared<SystemSpec>();
  s->name = "wave";
  s->n = 1;
  s->m = 2;
  s->T = T;
  s->A = {coef(speed, wave_matrix())};
  s->A[0].far_field = FarFieldBound{speed.sup_abs(), 0.0};
  s->B = CoefficientField::zero(2);
  s->F = zero_data(2);
  s->G = data(2, bump(1.0, width), g);
  return s;
}

}  // namespace fx
