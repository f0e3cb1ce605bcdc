#include "hyplens/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

namespace hyplens {

namespace {

double bump(double u) { return u < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - u)) : 0.0; }
// d/du of bump(u), u = r²
double bump_du(double u) {
  if (u >= 1.0) return 0.0;
  const double d = 1.0 - u;
  return -bump(u) / (d * d);
}

const std::pair<std::vector<double>, std::vector<double>>& gl_cached(int n) {
  static std::mutex mu;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) {
    std::pair<std::vector<double>, std::vector<double>> v;
    gauss_legendre(n, v.first, v.second);
    it = cache.emplace(n, std::move(v)).first;
  }
  return it->second;
}

/// Integrate f over [a,b] with `panels` equal panels of an `pts`-point rule, extra cuts honoured.
template <class F>
double panel_integral(F&& f, double a, double b, int panels, int pts, std::vector<double> cuts = {}) {
  std::vector<double> edges;
  for (int k = 0; k <= panels; ++k) edges.push_back(a + (b - a) * k / panels);
  for (double c : cuts)
    if (c > a && c < b) edges.push_back(c);
  std::sort(edges.begin(), edges.end());
  const auto& [x, w] = gl_cached(pts);
  double acc = 0.0;
  for (size_t e = 0; e + 1 < edges.size(); ++e) {
    const double lo = edges[e], hi = edges[e + 1];
    if (hi - lo <= 0.0) continue;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (size_t k = 0; k < x.size(); ++k) acc += half * w[k] * f(mid + half * x[k]);
  }
  return acc;
}

double bump_mass(int n) {
  if (n == 1) return panel_integral([](double x) { return bump(x * x); }, -1.0, 1.0, 64, 32);
  return 2.0 * std::numbers::pi * panel_integral([](double r) { return bump(r * r) * r; }, 0.0, 1.0, 64, 32);
}

std::vector<double> panel_edges(int panels, const std::vector<double>& cuts) {
  std::vector<double> e;
  for (int k = 0; k <= panels; ++k) e.push_back(-1.0 + 2.0 * k / panels);
  for (double c : cuts)
    if (c > -1.0 && c < 1.0) e.push_back(c);
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end(), [](double a, double b) { return std::abs(a - b) < 1e-15; }), e.end());
  return e;
}

void axis_rule(const std::vector<double>& edges, int pts, std::vector<double>& z, std::vector<double>& wz) {
  const auto& [x, w] = gl_cached(pts);
  z.clear();
  wz.clear();
  for (size_t e = 0; e + 1 < edges.size(); ++e) {
    const double mid = 0.5 * (edges[e] + edges[e + 1]), half = 0.5 * (edges[e + 1] - edges[e]);
    for (size_t k = 0; k < x.size(); ++k) {
      z.push_back(mid + half * x[k]);
      wz.push_back(half * w[k]);
    }
  }
}

bool needs_conv(const Profile& p) { return p.type != Profile::Type::constant && !p.eps_dependent(); }

bool coef_needs_conv(const CoefficientField& c) {
  return std::any_of(c.terms.begin(), c.terms.end(), [](const CoefTerm& t) { return needs_conv(t.profile); });
}

bool data_needs_conv(const DataField& d) {
  return !d.deltas.empty() ||
         std::any_of(d.terms.begin(), d.terms.end(), [](const DataTerm& t) { return needs_conv(t.profile); });
}

std::shared_ptr<const Mollifier> time_mollifier() {
  static const auto m = std::make_shared<const Mollifier>(Mollifier::make(1, 1));
  return m;
}

RegTimeFactor regularize_time(const TimeFactor& tf, double sigma) {
  RegTimeFactor r;
  r.rough = tf;
  r.sigma = sigma;
  if (tf.type == TimeFactor::Type::delta) r.rho = time_mollifier();
  return r;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

Mollifier Mollifier::make(int n, int m_mom, Shape) {
  if (n != 1 && n != 2) throw std::invalid_argument("mollifier dimension must be 1 or 2");
  if (m_mom < 1) throw std::invalid_argument("moment order must be >= 1");
  Mollifier mo;
  mo.n_ = n;
  mo.m_mom_ = m_mom;
  mo.z_ = bump_mass(n);
  const int even_orders = (m_mom - 1) / 2;  // orders 2, 4, .. ≤ m_mom − 1
  const int k = even_orders + 1;
  for (int i = 0; i < k; ++i) mo.s_.push_back(std::ldexp(1.0, -i));
  // Σ c_i s_i^{2p} = δ_{p0}, p = 0..even_orders
  Eigen::MatrixXd V(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  rhs(0) = 1.0;
  for (int p = 0; p < k; ++p)
    for (int i = 0; i < k; ++i) V(p, i) = std::pow(mo.s_[i], 2 * p);
  const Eigen::VectorXd c = V.fullPivLu().solve(rhs);
  mo.c_.assign(c.data(), c.data() + k);

  double mass = 0.0;
  const auto cuts = mo.breakpoints();
  std::vector<double> all_cuts = cuts;
  for (double c2 : cuts) all_cuts.push_back(-c2);
  if (n == 1) {
    mass = panel_integral([&](double x) { return mo.value({x, 0.0}); }, -1.0, 1.0, 16, 32, all_cuts);
  } else {
    mass = 2.0 * std::numbers::pi * panel_integral([&](double r) { return mo.value({r, 0.0}) * r; }, 0.0, 1.0, 16, 32, cuts);
  }
  if (std::abs(mass - 1.0) > 1e-10)
    throw std::runtime_error("mollifier normalization failed: mass = " + fmt(mass));
  return mo;
}

bool Mollifier::is_signed() const {
  return std::any_of(c_.begin(), c_.end(), [](double c) { return c < 0.0; });
}

double Mollifier::value(const Point& x) const {
  const double r2 = x[0] * x[0] + (n_ == 2 ? x[1] * x[1] : 0.0);
  double v = 0.0;
  for (size_t k = 0; k < s_.size(); ++k) v += c_[k] * std::pow(s_[k], -n_) * bump(r2 / (s_[k] * s_[k]));
  return v / z_;
}

Point Mollifier::gradient(const Point& x) const {
  const double r2 = x[0] * x[0] + (n_ == 2 ? x[1] * x[1] : 0.0);
  double f = 0.0;
  for (size_t k = 0; k < s_.size(); ++k) {
    const double s2 = s_[k] * s_[k];
    f += c_[k] * std::pow(s_[k], -n_) * bump_du(r2 / s2) * 2.0 / s2;
  }
  f /= z_;
  return {f * x[0], n_ == 2 ? f * x[1] : 0.0};
}

double Mollifier::scaled(const Point& x, double sigma) const {
  return value({x[0] / sigma, x[1] / sigma}) / std::pow(sigma, n_);
}

std::vector<double> Mollifier::breakpoints() const {
  std::vector<double> b;
  for (double s : s_)
    if (s < 1.0) b.push_back(s);
  return b;
}

double Mollifier::cdf(double u) const {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  std::vector<double> cuts;
  for (double s : breakpoints()) {
    cuts.push_back(s);
    cuts.push_back(-s);
  }
  return panel_integral([&](double x) { return value({x, 0.0}); }, -1.0, u, 8, 24, cuts);
}

ConvResult convolve_profile(const Profile& p, const Mollifier& rho, double sigma, const Point& x, int n,
                            const KernelQuadrature& q) {
  ConvResult r;
  if (p.type == Profile::Type::constant) {
    r.value = p.base;
    return r;
  }
  // Kernel ball entirely in a region where the profile is constant or affine: the symmetric kernel reproduces it.
  const double rx = n == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
  const bool compact = p.type == Profile::Type::bump || p.type == Profile::Type::lattice ||
                       (p.type == Profile::Type::kink2 && n == 1);
  bool affine = false;
  if (p.type == Profile::Type::step || p.type == Profile::Type::ramp) {
    affine = true;
    for (const auto& i : p.interfaces()) affine = affine && std::abs(x[i.axis] - i.position) > sigma;
  }
  if ((compact && rx > p.support_radius(n) + sigma) || affine) {
    r.value = p.value(x, n);
    r.grad = p.gradient(x, n);
    return r;
  }
  std::vector<double> radial_cuts;
  for (double s : rho.breakpoints()) {
    radial_cuts.push_back(s);
    radial_cuts.push_back(-s);
  }
  std::vector<double> z[2], wz[2];
  for (int a = 0; a < n; ++a) {
    std::vector<double> cuts = radial_cuts;
    for (const auto& i : p.interfaces())
      if (i.axis == a) cuts.push_back((x[a] - i.position) / sigma);
    if (n == 1)
      axis_rule(panel_edges(q.panels, cuts), q.points, z[a], wz[a]);
    else
      axis_rule(panel_edges(q.panels_2d, cuts), q.points_2d, z[a], wz[a]);
  }
  if (n == 1) {
    for (size_t k = 0; k < z[0].size(); ++k) {
      const double zk = z[0][k];
      const double pv = p.value({x[0] - sigma * zk, 0.0}, 1);
      r.value += wz[0][k] * pv * rho.value({zk, 0.0});
      r.grad[0] += wz[0][k] * pv * rho.gradient({zk, 0.0})[0];
    }
  } else {
    for (size_t k = 0; k < z[0].size(); ++k) {
      for (size_t l = 0; l < z[1].size(); ++l) {
        const Point zz{z[0][k], z[1][l]};
        if (zz[0] * zz[0] + zz[1] * zz[1] >= 1.0) continue;
        const double w = wz[0][k] * wz[1][l];
        const double pv = p.value({x[0] - sigma * zz[0], x[1] - sigma * zz[1]}, 2);
        const Point g = rho.gradient(zz);
        r.value += w * pv * rho.value(zz);
        r.grad[0] += w * pv * g[0];
        r.grad[1] += w * pv * g[1];
      }
    }
  }
  r.grad[0] /= sigma;
  r.grad[1] /= sigma;
  return r;
}

double RegTimeFactor::value(double t) const {
  switch (rough.type) {
    case TimeFactor::Type::constant: return rough.base;
    case TimeFactor::Type::sin: return rough.base + rough.amp * std::sin(rough.omega * t);
    case TimeFactor::Type::delta: return rough.base * rho->value({(t - rough.t0) / sigma, 0.0}) / sigma;
  }
  return 0.0;
}

double RegTimeFactor::derivative(double t, int order) const {
  if (order == 0) return value(t);
  switch (rough.type) {
    case TimeFactor::Type::constant: return 0.0;
    case TimeFactor::Type::sin: {
      const double w = rough.omega;
      switch (order % 4) {
        case 1: return rough.amp * std::pow(w, order) * std::cos(w * t);
        case 2: return -rough.amp * std::pow(w, order) * std::sin(w * t);
        case 3: return -rough.amp * std::pow(w, order) * std::cos(w * t);
        default: return rough.amp * std::pow(w, order) * std::sin(w * t);
      }
    }
    case TimeFactor::Type::delta: {
      const double u = (t - rough.t0) / sigma;
      if (order == 1) return rough.base * rho->gradient({u, 0.0})[0] / (sigma * sigma);
      const double h = 1e-4;
      const double gp = rho->gradient({u + h, 0.0})[0], gm = rho->gradient({u - h, 0.0})[0];
      return rough.base * (gp - gm) / (2.0 * h) / (sigma * sigma * sigma);
    }
  }
  return 0.0;
}

double RegTimeFactor::integral(double a, double b) const {
  switch (rough.type) {
    case TimeFactor::Type::constant: return rough.base * (b - a);
    case TimeFactor::Type::sin: {
      double v = rough.base * (b - a);
      if (rough.omega != 0.0) v -= rough.amp / rough.omega * (std::cos(rough.omega * b) - std::cos(rough.omega * a));
      return v;
    }
    case TimeFactor::Type::delta:
      return rough.base * (rho->cdf((b - rough.t0) / sigma) - rho->cdf((a - rough.t0) / sigma));
  }
  return 0.0;
}

double RegTimeFactor::sup_abs() const {
  if (rough.type == TimeFactor::Type::delta) return std::abs(rough.base) * rho->value({0.0, 0.0}) / sigma;
  return rough.sup_abs();
}

std::vector<std::string> Ledger::columns(int n) {
  std::vector<std::string> c{"div_linf", "div_l1inf"};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.push_back("dA_sup_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
  for (int j = 0; j < n; ++j) c.push_back("A_sup_" + std::to_string(j + 1));
  for (const char* s : {"B_sup", "B_herm_sup", "G_l2", "G_linf", "F_l2"}) c.push_back(s);
  return c;
}

std::vector<double> Ledger::row() const {
  std::vector<double> r{div_linf, div_l1inf};
  r.insert(r.end(), dA_sup.begin(), dA_sup.end());
  r.insert(r.end(), A_sup.begin(), A_sup.end());
  for (double v : {B_sup, B_herm_sup, G_l2, G_linf, F_l2}) r.push_back(v);
  return r;
}

double RegularizedSystem::max_speed() const {
  double c = 0.0;
  const long N = grid.nodes();
  for (size_t j = 0; j < A.size(); ++j) {
    double s = 0.0;
    for (long i = 0; i < N; ++i) s = std::max(s, op_norm(A[j].at(i)));
    c = std::max(c, s * A[j].time.sup_abs());
  }
  return c;
}

CMat RegularizedSystem::div_term(double t, long idx) const {
  const int nn = n();
  CMat d = -B.time.value(t) * (B.at(idx) + B.at(idx).adjoint());
  for (int j = 0; j < nn; ++j) d += A[j].time.value(t) * dA[j * nn + j].at(idx);
  return d;
}

CMat RegularizedSystem::interp(const SampledField& f, double t, const Point& x) const {
  CMat out = CMat::Zero(f.rows, f.cols);
  const int nn = grid.n;
  int base[2] = {0, 0};
  double frac[2] = {0.0, 0.0};
  for (int a = 0; a < nn; ++a) {
    const double s = (x[a] + grid.L) / grid.dx - 0.5;
    base[a] = static_cast<int>(std::floor(s));
    frac[a] = s - base[a];
  }
  const int corners = nn == 1 ? 2 : 4;
  for (int c = 0; c < corners; ++c) {
    int idx[2] = {0, 0};
    double w = 1.0;
    bool inside = true;
    for (int a = 0; a < nn; ++a) {
      const int bit = (c >> a) & 1;
      idx[a] = base[a] + bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
      inside = inside && idx[a] >= 0 && idx[a] < grid.N;
    }
    if (!inside || w == 0.0) continue;
    const long flat = nn == 1 ? idx[0] : static_cast<long>(idx[0]) * grid.N + idx[1];
    out += w * load_matrix(f.node(flat), f.rows, f.cols);
  }
  return f.time.value(t) * out;
}

CMat RegularizedSystem::div_term_at(double t, const Point& x) const {
  const int nn = n();
  CMat b = interp(B, t, x);
  CMat d = -(b + b.adjoint());
  for (int j = 0; j < nn; ++j) d += interp(dA[j * nn + j], t, x);
  return d;
}

CVec RegularizedSystem::G_at(long idx) const { return G.at(idx).col(0); }

CVec RegularizedSystem::F_at(double t, long idx) const { return F.time.value(t) * F.at(idx).col(0); }

double smallest_sigma(const SystemSpec& spec, const ScaleLaw& law, double eps) {
  double s = std::numeric_limits<double>::infinity();
  auto upd = [&](const std::optional<ScaleLaw>& l, bool needed) {
    if (needed) s = std::min(s, l.value_or(law).sigma(eps));
  };
  for (const auto& a : spec.A) upd(a.law, coef_needs_conv(a));
  upd(spec.B.law, coef_needs_conv(spec.B));
  upd(spec.F.law, data_needs_conv(spec.F));
  upd(spec.G.law, data_needs_conv(spec.G));
  return s;
}

RegularizedSystem regularize(std::shared_ptr<const SystemSpec> spec_ptr, const Mollifier& moll, const ScaleLaw& law,
                             double eps, const Grid& grid, const RegularizeOptions& opt) {
  const SystemSpec& spec = *spec_ptr;
  spec.check_shapes();
  if (moll.n() != spec.n) throw std::invalid_argument("mollifier dimension does not match the system");
  if (grid.n != spec.n) throw std::invalid_argument("grid dimension does not match the system");
  const int n = spec.n, m = spec.m;

  const double smin = smallest_sigma(spec, law, eps);
  if (std::isfinite(smin) && smin < opt.resolve_factor * grid.dx) {
    const double need = smin / opt.resolve_factor;
    throw RefusalError("sigma_eps = " + fmt(smin) + " is below " + fmt(opt.resolve_factor) + " dx (dx = " + fmt(grid.dx) +
                           "); the smoothed layer would be unresolved, need dx <= " + fmt(need),
                       need);
  }
  auto check_time = [&](const TimeFactor& tf, const std::optional<ScaleLaw>& l) {
    if (tf.type != TimeFactor::Type::delta || grid.dt <= 0.0) return;
    const double st = l.value_or(law).sigma(eps);
    if (st < opt.resolve_factor * grid.dt)
      throw RefusalError("time sigma_eps = " + fmt(st) + " below " + fmt(opt.resolve_factor) + " dt; need dt <= " +
                             fmt(st / opt.resolve_factor),
                         st / opt.resolve_factor);
  };
  for (const auto& a : spec.A) check_time(a.time, a.law);
  check_time(spec.B.time, spec.B.law);
  check_time(spec.F.time, spec.F.law);

  double sig_max = 0.0;
  for (const auto& a : spec.A)
    if (coef_needs_conv(a)) sig_max = std::max(sig_max, a.law.value_or(law).sigma(eps));
  if (data_needs_conv(spec.G)) sig_max = std::max(sig_max, spec.G.law.value_or(law).sigma(eps));
  if (opt.check_extent) {
    const double supp = std::max(spec.G.support_radius(n), spec.F.is_zero() ? 0.0 : spec.F.support_radius(n));
    const double speed = spec.principal_bound();
    if (!std::isfinite(supp))
      throw RefusalError("data support is not compact; the finite-propagation guard cannot hold", 0.0);
    if (std::isfinite(speed)) {
      const double need = supp + spec.T * speed + sig_max + 4.0 * grid.dx;
      if (grid.L < need - 1e-12)
        throw RefusalError("grid half-width L = " + fmt(grid.L) + " is below support + T max|A| + sigma + 4 dx = " +
                               fmt(need),
                           need);
    }
  }

  RegularizedSystem reg;
  reg.spec = spec_ptr;
  reg.eps = eps;
  reg.law = law;
  reg.sigma = law.sigma(eps);
  reg.grid = grid;
  const long N = grid.nodes();

  auto coef_field = [&](const CoefficientField& c, std::vector<SampledField>* grads) {
    const double sig = c.law.value_or(law).sigma(eps);
    SampledField f;
    f.rows = f.cols = m;
    f.data.assign(N * m * m, 0.0);
    f.time = regularize_time(c.time, sig);
    if (grads) {
      for (int i = 0; i < n; ++i) {
        SampledField g;
        g.rows = g.cols = m;
        g.data.assign(N * m * m, 0.0);
        g.time = f.time;
        grads->push_back(std::move(g));
      }
    }
    for (const auto& term : c.terms) {
      for (long idx = 0; idx < N; ++idx) {
        const Point x = grid.point(idx);
        ConvResult cr;
        if (needs_conv(term.profile)) {
          cr = convolve_profile(term.profile, moll, sig, x, n, opt.quad);
        } else {
          cr.value = term.profile.value(x, n, eps);
          cr.grad = term.profile.gradient(x, n, eps);
        }
        cplx* dst = f.data.data() + idx * m * m;
        for (int r = 0; r < m * m; ++r) dst[r] += cr.value * term.matrix(r / m, r % m);
        if (grads) {
          for (int i = 0; i < n; ++i) {
            cplx* gd = (*grads)[grads->size() - n + i].data.data() + idx * m * m;
            for (int r = 0; r < m * m; ++r) gd[r] += cr.grad[i] * term.matrix(r / m, r % m);
          }
        }
      }
    }
    return f;
  };

  std::vector<std::vector<SampledField>> grads(n);
  for (int j = 0; j < n; ++j) reg.A.push_back(coef_field(spec.A[j], &grads[j]));
  reg.dA.resize(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) reg.dA[i * n + j] = grads[j][i];
  reg.B = coef_field(spec.B, nullptr);

  auto data_field = [&](const DataField& d) {
    const double sig = d.law.value_or(law).sigma(eps);
    SampledField f;
    f.rows = m;
    f.cols = 1;
    f.data.assign(N * m, 0.0);
    f.time = regularize_time(d.time, sig);
    const double scale = std::pow(eps, d.eps_power);
    for (long idx = 0; idx < N; ++idx) {
      const Point x = grid.point(idx);
      cplx* dst = f.data.data() + idx * m;
      for (const auto& term : d.terms) {
        const double v = needs_conv(term.profile) ? convolve_profile(term.profile, moll, sig, x, n, opt.quad).value
                                                  : term.profile.value(x, n, eps);
        for (int r = 0; r < m; ++r) dst[r] += scale * v * term.vector(r);
      }
      for (const auto& dl : d.deltas) {
        const double v = moll.scaled({x[0] - dl.center[0], x[1] - dl.center[1]}, sig);
        for (int r = 0; r < m; ++r) dst[r] += scale * v * dl.vector(r);
      }
    }
    return f;
  };
  reg.F = data_field(spec.F);
  reg.G = data_field(spec.G);
  reg.ledger = norm_ledger(reg);
  return reg;
}

Ledger norm_ledger(const RegularizedSystem& reg) {
  const SystemSpec& spec = *reg.spec;
  const int n = spec.n;
  const long N = reg.grid.nodes();
  const double dv = reg.grid.cell_volume();
  Ledger L;

  bool static_coefs = reg.B.time.is_constant();
  double min_sigma_t = std::numeric_limits<double>::infinity();
  for (const auto& a : reg.A) static_coefs = static_coefs && a.time.is_constant();
  for (const auto* f : {&reg.B, &reg.F})
    if (f->time.rough.type == TimeFactor::Type::delta) min_sigma_t = std::min(min_sigma_t, f->time.sigma);
  for (const auto& a : reg.A)
    if (a.time.rough.type == TimeFactor::Type::delta) min_sigma_t = std::min(min_sigma_t, a.time.sigma);

  if (static_coefs) {
    L.times = {0.0};
  } else {
    int K = std::max(reg.grid.steps, 64);
    if (std::isfinite(min_sigma_t)) K = std::max(K, static_cast<int>(std::ceil(16.0 * spec.T / min_sigma_t)));
    for (int k = 0; k <= K; ++k) L.times.push_back(spec.T * k / K);
  }
  // Per-node spatial parts, combined with time factors below.
  std::vector<CMat> herm(N), divs(n * N);
  for (long i = 0; i < N; ++i) {
    const CMat b = reg.B.at(i);
    herm[i] = b + b.adjoint();
    for (int j = 0; j < n; ++j) divs[j * N + i] = reg.dA[j * n + j].at(i);
  }
  for (double t : L.times) {
    const double tb = reg.B.time.value(t);
    double s = 0.0;
    for (long i = 0; i < N; ++i) {
      CMat d = -tb * herm[i];
      for (int j = 0; j < n; ++j) d += reg.A[j].time.value(t) * divs[j * N + i];
      s = std::max(s, op_norm(d));
    }
    L.div_profile.push_back(s);
  }
  L.div_linf = *std::max_element(L.div_profile.begin(), L.div_profile.end());
  if (static_coefs) {
    L.div_l1inf = spec.T * L.div_linf;
  } else {
    for (size_t k = 0; k + 1 < L.times.size(); ++k)
      L.div_l1inf += 0.5 * (L.times[k + 1] - L.times[k]) * (L.div_profile[k] + L.div_profile[k + 1]);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (long q = 0; q < N; ++q) s = std::max(s, op_norm(reg.dA[i * n + j].at(q)));
      L.dA_sup.push_back(s * reg.A[j].time.sup_abs());
    }
  }
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (long q = 0; q < N; ++q) s = std::max(s, op_norm(reg.A[j].at(q)));
    L.A_sup.push_back(s * reg.A[j].time.sup_abs());
  }
  double bs = 0.0, bh = 0.0;
  for (long q = 0; q < N; ++q) {
    bs = std::max(bs, op_norm(reg.B.at(q)));
    bh = std::max(bh, 0.5 * op_norm(herm[q]));
  }
  L.B_sup = bs * reg.B.time.sup_abs();
  L.B_herm_sup = bh * reg.B.time.sup_abs();
  double g2 = 0.0, gi = 0.0, f2 = 0.0;
  for (long q = 0; q < N; ++q) {
    const double gn = reg.G.at(q).norm();
    g2 += gn * gn * dv;
    gi = std::max(gi, gn);
    const double fn = reg.F.at(q).norm();
    f2 += fn * fn * dv;
  }
  L.G_l2 = std::sqrt(g2);
  L.G_linf = gi;
  double theta2 = 0.0;
  if (reg.F.time.is_constant()) {
    theta2 = reg.F.time.rough.base * reg.F.time.rough.base * spec.T;
  } else {
    const int K = 4096;
    for (int k = 0; k < K; ++k) {
      const double t = spec.T * (k + 0.5) / K;
      const double v = reg.F.time.value(t);
      theta2 += v * v * spec.T / K;
    }
  }
  L.F_l2 = std::sqrt(f2 * theta2);
  return L;
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& values) {
  std::vector<double> xs, ys;
  for (const auto& [s, e] : values) {
    if (!(s > 0.0) || !(e > 0.0) || !std::isfinite(s) || !std::isfinite(e)) continue;
    xs.push_back(std::log(s));
    ys.push_back(std::log(e));
  }
  if (xs.size() < 4)
    throw RefusalError("rate fit needs at least 4 positive points, got " + std::to_string(xs.size()), 4.0);
  const double k = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / k;
    my += ys[i] / k;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw RefusalError("rate fit needs distinct abscissae", 4.0);
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    ssr += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  f.used = static_cast<int>(xs.size());
  return f;
}

std::vector<double> eps_grid(int k_min, int k_max) {
  std::vector<double> e;
  for (int k = k_min; k <= k_max; ++k) e.push_back(std::ldexp(1.0, -k));
  return e;
}

}  // namespace hyplens
