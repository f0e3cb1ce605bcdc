#include "hyplens/system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace hyplens {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_point(const Point& x, int n) {
  std::ostringstream os;
  os.precision(6);
  os << "(" << x[0];
  if (n == 2) os << ", " << x[1];
  os << ")";
  return os.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Point random_point(std::mt19937_64& rng, int n, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Point x{u(rng), 0.0};
  if (n == 2) x[1] = u(rng);
  return x;
}

double sample_radius(const SystemSpec& spec) {
  double r = 1.0;
  auto grow = [&](double v) {
    if (std::isfinite(v)) r = std::max(r, v);
  };
  for (const auto& a : spec.A) {
    for (const auto& t : a.terms) grow(t.profile.support_radius(spec.n));
    for (const auto& i : a.interfaces()) grow(std::abs(i.position));
    if (a.far_field) grow(a.far_field->R_A);
  }
  grow(spec.G.support_radius(spec.n));
  return r + 5.0;
}

}  // namespace

CoefficientField CoefficientField::zero(int m) {
  CoefficientField c;
  c.m = m;
  return c;
}

CoefficientField CoefficientField::constant(const CMat& value) {
  CoefficientField c;
  c.m = static_cast<int>(value.rows());
  Profile p;
  p.type = Profile::Type::constant;
  p.base = 1.0;
  c.terms.push_back({p, value});
  return c;
}

CoefficientField::Kind CoefficientField::kind() const {
  bool lattice = false;
  for (const auto& t : terms) {
    if (!t.profile.interfaces().empty() || t.profile.eps_dependent()) return Kind::piecewise;
    lattice = lattice || t.profile.type == Profile::Type::lattice;
  }
  return lattice ? Kind::lattice : Kind::smooth;
}

bool CoefficientField::eps_dependent() const {
  return std::any_of(terms.begin(), terms.end(), [](const CoefTerm& t) { return t.profile.eps_dependent(); });
}

CMat CoefficientField::spatial(const Point& x, int n, double eps) const {
  CMat out = CMat::Zero(m, m);
  for (const auto& t : terms) out += t.profile.value(x, n, eps) * t.matrix;
  return out;
}

CMat CoefficientField::eval(double t, const Point& x, int n, double eps) const {
  return time.rough_value(t) * spatial(x, n, eps);
}

std::vector<Interface> CoefficientField::interfaces() const {
  std::vector<Interface> out;
  for (const auto& t : terms) {
    auto i = t.profile.interfaces();
    out.insert(out.end(), i.begin(), i.end());
  }
  return out;
}

double CoefficientField::sup_bound() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.profile.sup_abs() * op_norm(t.matrix);
  return s;
}

double CoefficientField::lipschitz_bound() const {
  double s = 0.0;
  for (const auto& t : terms) {
    if (op_norm(t.matrix) == 0.0) continue;
    s += t.profile.lipschitz() * op_norm(t.matrix);
  }
  return s;
}

CVec DataField::spatial(const Point& x, int n, double eps) const {
  CVec out = CVec::Zero(m);
  for (const auto& t : terms) out += t.profile.value(x, n, eps) * t.vector;
  return out;
}

std::vector<Interface> DataField::interfaces() const {
  std::vector<Interface> out;
  for (const auto& t : terms) {
    auto i = t.profile.interfaces();
    out.insert(out.end(), i.begin(), i.end());
  }
  return out;
}

double DataField::support_radius(int n) const {
  double r = 0.0;
  for (const auto& t : terms) r = std::max(r, t.profile.support_radius(n));
  for (const auto& d : deltas) r = std::max(r, std::hypot(d.center[0], n == 2 ? d.center[1] : 0.0));
  return r;
}

std::string to_string(DataClass c) {
  switch (c) {
    case DataClass::general: return "general";
    case DataClass::linf: return "linf";
    case DataClass::l2: return "l2";
  }
  return "?";
}

std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::T31: return "T3.1";
    case Theorem::T32: return "T3.2";
    case Theorem::T33: return "T3.3";
  }
  return "?";
}

std::string to_string(Status s) {
  switch (s) {
    case Status::satisfied: return "satisfied";
    case Status::violated: return "violated";
    case Status::not_checkable: return "not_checkable";
  }
  return "?";
}

DataClass parse_data_class(const std::string& s) {
  if (s == "general") return DataClass::general;
  if (s == "linf") return DataClass::linf;
  if (s == "l2") return DataClass::l2;
  throw std::invalid_argument("unknown data class '" + s + "' (expected general|linf|l2)");
}

Theorem parse_theorem(const std::string& s) {
  if (s == "T3.1") return Theorem::T31;
  if (s == "T3.2") return Theorem::T32;
  if (s == "T3.3") return Theorem::T33;
  throw std::invalid_argument("unknown theorem '" + s + "' (expected T3.1|T3.2|T3.3)");
}

void SystemSpec::check_shapes() const {
  if (n != 1 && n != 2) throw std::invalid_argument("spatial dimension n must be 1 or 2");
  if (m < 1) throw std::invalid_argument("system size m must be >= 1");
  if (!(T > 0.0)) throw std::invalid_argument("time horizon T must be > 0");
  if (static_cast<int>(A.size()) != n) throw std::invalid_argument("need exactly n principal coefficients");
  auto check_coef = [&](const CoefficientField& c, const std::string& what) {
    if (c.m != m) throw std::invalid_argument(what + ": size mismatch");
    for (const auto& t : c.terms)
      if (t.matrix.rows() != m || t.matrix.cols() != m) throw std::invalid_argument(what + ": matrix must be m x m");
  };
  for (int j = 0; j < n; ++j) check_coef(A[j], "A" + std::to_string(j + 1));
  check_coef(B, "B");
  auto check_data = [&](const DataField& d, const std::string& what) {
    if (d.m != m) throw std::invalid_argument(what + ": size mismatch");
    for (const auto& t : d.terms)
      if (t.vector.size() != m) throw std::invalid_argument(what + ": vector must have m entries");
    for (const auto& t : d.deltas)
      if (t.vector.size() != m) throw std::invalid_argument(what + ": delta vector must have m entries");
  };
  check_data(F, "F");
  check_data(G, "G");
}

double SystemSpec::principal_bound() const {
  double c = 0.0;
  for (const auto& a : A) c = std::max(c, a.sup_bound() * a.time.sup_abs());
  return c;
}

Grid Grid::make(int n, int N, double L) {
  if (n != 1 && n != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
  if (N < 4) throw std::invalid_argument("grid needs at least 4 cells per axis");
  if (!(L > 0.0)) throw std::invalid_argument("grid half-width must be > 0");
  Grid g;
  g.n = n;
  g.N = N;
  g.L = L;
  g.dx = 2.0 * L / N;
  return g;
}

bool ValidationReport::all_pass() const {
  if (!structural_ok) return false;
  return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.status == Status::satisfied; });
}

HermitianSample sample_hermitian_defect(const SystemSpec& spec, unsigned seed, int samples, double radius) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> k(2, 12);
  HermitianSample worst;
  double worst_rel = -1.0;
  for (int s = 0; s < samples; ++s) {
    const Point x = random_point(rng, spec.n, radius);
    const double eps = std::ldexp(1.0, -k(rng));
    for (int j = 0; j < spec.n; ++j) {
      const CMat a = spec.A[j].spatial(x, spec.n, eps);
      const double d = hermitian_defect(a);
      const double rel = d / (1.0 + op_norm(a));
      if (rel > worst_rel) {
        worst_rel = rel;
        worst = {d, j, x};
      }
    }
  }
  return worst;
}

ValidationReport validate_hypotheses(const SystemSpec& spec, Theorem theorem, const ScaleLaw& default_law,
                                     unsigned seed, int samples) {
  spec.check_shapes();
  ValidationReport rep;
  rep.theorem = theorem;
  const int n = spec.n;
  const double radius = sample_radius(spec);

  // Symmetric hyperbolicity.
  {
    HypothesisCheck h{"H", "principal coefficients A^j are Hermitian", Status::satisfied, ""};
    const HermitianSample w = sample_hermitian_defect(spec, seed, samples, radius);
    const CMat a = spec.A[w.axis].spatial(w.x, n, 0.25);
    const double tol = 1e-12 * (1.0 + op_norm(a));
    h.evidence = "max |A-A*| = " + fmt(w.defect) + " at A" + std::to_string(w.axis + 1) + ", x=" + fmt_point(w.x, n) +
                 " over " + std::to_string(samples) + " samples";
    if (w.defect >= tol) {
      h.status = Status::violated;
      rep.structural_ok = false;
      rep.structural_message = "A" + std::to_string(w.axis + 1) + " is not Hermitian at x=" + fmt_point(w.x, n) +
                               " (max |A-A*| = " + fmt(w.defect) + "); the system is not symmetric hyperbolic";
    }
    rep.checks.push_back(h);
  }

  // Data class.
  {
    HypothesisCheck h;
    const bool is31 = theorem == Theorem::T31, is32 = theorem == Theorem::T32;
    h.id = is31 ? "i" : (is32 ? "i'" : "i''");
    h.statement = is31 ? "G, F generalized functions (moderate representatives)"
                       : (is32 ? "G, F of L-infinity type" : "G, F of L2 type");
    const DataClass need = is31 ? DataClass::general : (is32 ? DataClass::linf : DataClass::l2);
    std::string ev = "declared data class " + to_string(spec.data_class) + "; G_eps = eps^" + fmt(spec.G.eps_power) +
                     " (G * rho_sigma) is moderate for every real exponent";
    bool ok = is31 || spec.data_class == need;
    if (ok && need == DataClass::l2) {
      for (const auto* d : {&spec.G, &spec.F})
        for (const auto& t : d->terms)
          if (!t.profile.vanishes_at_infinity() && t.vector.norm() > 0.0) {
            ok = false;
            ev += "; data term '" + t.profile.describe() + "' is not square integrable";
          }
    }
    if (!ok && spec.data_class != need) ev += "; " + to_string(theorem) + " needs class " + to_string(need);
    h.status = ok ? Status::satisfied : Status::violated;
    h.evidence = ev;
    rep.checks.push_back(h);
  }

  // Log-type conditions on ∂A and the Hermitian part of B.
  {
    HypothesisCheck h;
    const std::string flavor = theorem == Theorem::T31 ? "locally" : (theorem == Theorem::T32 ? "L-infinity" : "L1,inf");
    h.id = theorem == Theorem::T31 ? "ii" : (theorem == Theorem::T32 ? "ii'" : "ii''");
    h.statement = "d_x A^j and the Hermitian part of B are " + flavor + " log-type";
    Status st = Status::satisfied;
    std::vector<std::string> ev;
    auto merge = [&](Status s) {
      if (s == Status::violated || (s == Status::not_checkable && st == Status::satisfied)) st = s;
    };
    const bool mixed_norm = theorem == Theorem::T33;
    auto law_of = [&](const std::optional<ScaleLaw>& l) { return l.value_or(default_law); };
    auto time_ok = [&](const TimeFactor& tf, const ScaleLaw& law) {
      if (tf.type != TimeFactor::Type::delta) return true;
      return mixed_norm || law.derivative_log_type();
    };
    for (int j = 0; j < n; ++j) {
      const auto& a = spec.A[j];
      const std::string name = "A" + std::to_string(j + 1);
      if (a.eps_dependent()) {
        merge(Status::not_checkable);
        ev.push_back(name + ": explicit eps-indexed net, deferred to the sampled ledger");
        continue;
      }
      bool jump = false;
      for (const auto& i : a.interfaces()) jump = jump || i.jump;
      if (jump) {
        const bool ok = law_of(a.law).derivative_log_type();
        merge(ok ? Status::satisfied : Status::violated);
        ev.push_back(name + ": jump interface, law " + law_of(a.law).name() + " gives sup|dA_eps| ~ 1/sigma_eps" +
                     (ok ? " = O(log 1/eps)" : " = O(1/eps), not log-type"));
      } else {
        ev.push_back(name + ": Lipschitz bound " + fmt(a.lipschitz_bound()) + " uniform in eps");
      }
      if (!time_ok(a.time, law_of(a.law))) {
        merge(Status::violated);
        ev.push_back(name + ": delta time factor is unbounded in sup norm");
      }
    }
    const auto& b = spec.B;
    double herm = 0.0;
    for (const auto& t : b.terms) herm = std::max(herm, hermitian_part(t.matrix).cwiseAbs().maxCoeff());
    if (herm == 0.0) {
      ev.push_back("B: Hermitian part vanishes identically");
    } else if (b.eps_dependent() || std::isfinite(b.sup_bound())) {
      if (!time_ok(b.time, law_of(b.law))) {
        merge(Status::violated);
        ev.push_back("B: delta time factor, sup norm of Re(B_eps) ~ 1/sigma_eps");
      } else if (b.time.type == TimeFactor::Type::delta) {
        ev.push_back(mixed_norm ? "B: delta time factor has eps-uniform L1,inf norm"
                                : "B: delta time factor under log law, sup ~ log(1/eps)");
      } else {
        ev.push_back("B: Hermitian part bounded by " + fmt(b.sup_bound()));
      }
    }
    h.status = st;
    for (size_t k = 0; k < ev.size(); ++k) h.evidence += (k ? "; " : "") + ev[k];
    rep.checks.push_back(h);
  }

  // Far-field bound (T3.1 only).
  if (theorem == Theorem::T31) {
    HypothesisCheck h{"iii", "||A^j_eps||_op = O(1) for |x| > R_A", Status::satisfied, ""};
    std::mt19937_64 rng(seed + 17);
    std::uniform_int_distribution<int> k(2, 12);
    std::vector<std::string> ev;
    for (int j = 0; j < n; ++j) {
      const auto& a = spec.A[j];
      const std::string name = "A" + std::to_string(j + 1);
      if (!a.far_field) {
        h.status = Status::violated;
        ev.push_back(name + ": no far-field bound declared");
        continue;
      }
      const auto ff = *a.far_field;
      double worst = 0.0;
      Point wx{0.0, 0.0};
      const double tf = a.time.sup_abs();
      for (int s = 0; s < samples; ++s) {
        Point x = random_point(rng, n, radius + ff.R_A);
        const double r = std::hypot(x[0], n == 2 ? x[1] : 0.0);
        if (r <= ff.R_A) continue;
        const double v = tf * op_norm(a.spatial(x, n, std::ldexp(1.0, -k(rng))));
        if (v > worst) {
          worst = v;
          wx = x;
        }
      }
      if (worst > ff.C * (1.0 + 1e-12) + 1e-14) {
        h.status = Status::violated;
        ev.push_back(name + ": sampled ||A||_op = " + fmt(worst) + " > C = " + fmt(ff.C) + " at x=" + fmt_point(wx, n));
      } else {
        ev.push_back(name + ": sampled max ||A||_op = " + fmt(worst) + " <= C = " + fmt(ff.C) + " beyond R_A = " +
                     fmt(ff.R_A));
      }
    }
    for (size_t q = 0; q < ev.size(); ++q) h.evidence += (q ? "; " : "") + ev[q];
    if (h.status == Status::violated) {
      bool missing = false;
      for (const auto& a : spec.A) missing = missing || !a.far_field;
      if (missing)
        rep.suggestion = "T3.2 drops the far-field O(1) condition on A^j_eps; it requires L-infinity type data";
    }
    rep.checks.push_back(h);
  }
  return rep;
}

}  // namespace hyplens
