#include "hyplens/sweep.hpp"

#include "hyplens/lifted.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace hyplens {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double bump1(double s) { return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }
double bump1_d(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double q = 1.0 - s * s;
  return bump1(s) * (-2.0 * s / (q * q));
}

double bump1_mass() {
  static const double mass = [] {
    std::vector<double> x, w;
    gauss_legendre(64, x, w);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += w[i] * bump1(x[i]);
    return s;
  }();
  return mass;
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Largest σ among fields that are convolved (what the half-width has to absorb).
double largest_sigma(const SystemSpec& spec, const ScaleLaw& law, double eps) {
  double s = 0.0;
  for (const auto& a : spec.A)
    if (!a.is_zero()) s = std::max(s, a.law.value_or(law).sigma(eps));
  if (!spec.G.is_zero()) s = std::max(s, spec.G.law.value_or(law).sigma(eps));
  if (!spec.F.is_zero()) s = std::max(s, spec.F.law.value_or(law).sigma(eps));
  return s;
}

double smallest_time_sigma(const SystemSpec& spec, const ScaleLaw& law, double eps) {
  double s = kInf;
  auto upd = [&](const TimeFactor& tf, const std::optional<ScaleLaw>& l) {
    if (tf.type == TimeFactor::Type::delta) s = std::min(s, l.value_or(law).sigma(eps));
  };
  for (const auto& a : spec.A) upd(a.time, a.law);
  upd(spec.B.time, spec.B.law);
  upd(spec.F.time, spec.F.law);
  return s;
}

CMat rough_derivative(const CoefficientField& c, int axis, const Point& x, int n, double eps) {
  CMat out = CMat::Zero(c.m, c.m);
  for (const auto& t : c.terms) out += t.profile.gradient(x, n, eps)[axis] * t.matrix;
  return out;
}

bool has_delta_time(const SystemSpec& spec) {
  auto d = [](const TimeFactor& t) { return t.type == TimeFactor::Type::delta; };
  for (const auto& a : spec.A)
    if (d(a.time)) return true;
  return d(spec.B.time) || d(spec.F.time);
}

double coupling_product(const RegularizedSystem& reg) {
  const SystemSpec& spec = *reg.spec;
  const Grid& g = reg.grid;
  const int n = g.n, m = reg.m();
  double dA = 0.0;
  for (int j = 0; j < n; ++j)
    for (long q = 0; q < g.nodes(); ++q)
      dA = std::max(dA, op_norm(reg.A[j].at(q) - spec.A[j].spatial(g.point(q), n, reg.eps)));
  double dB = 0.0;
  if (!reg.B.empty()) {
    const GridField gb = grad_stack(g, reg.B.data, m * m);
    for (const auto& v : gb) dB = std::max(dB, std::abs(v));
  }
  double h1 = 0.0;
  if (!reg.G.empty()) {
    const double g0 = field_l2(g, reg.G.data);
    const double g1 = field_l2(g, grad_stack(g, reg.G.data, m));
    h1 = std::sqrt(g0 * g0 + g1 * g1);
  }
  return dA * std::max({dB, h1, reg.ledger.F_l2});
}

std::vector<double> log_inv(const std::vector<std::pair<double, double>>& s) {
  std::vector<double> x;
  for (const auto& p : s) x.push_back(std::log(1.0 / p.first));
  return x;
}

/// Least squares y ≈ a + b x.
struct Line {
  double a = 0.0, b = 0.0, r2 = 0.0;
};
Line line_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double k = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  Line l;
  l.b = sxx > 0.0 ? sxy / sxx : 0.0;
  l.a = my - l.b * mx;
  double sse = 0.0;
  for (size_t i = 0; i < x.size(); ++i) sse += std::pow(y[i] - l.a - l.b * x[i], 2);
  l.r2 = syy > 1e-30 * std::max(1.0, my * my) ? 1.0 - sse / syy : 1.0;
  return l;
}

double rel_rms(const std::vector<double>& y, const std::vector<double>& fit) {
  double s = 0.0;
  for (size_t i = 0; i < y.size(); ++i) s += std::pow((y[i] - fit[i]) / y[i], 2);
  return std::sqrt(s / static_cast<double>(y.size()));
}

}  // namespace

std::string NormKey::name() const { return "norm_r" + std::to_string(r) + "_l" + std::to_string(l); }

std::vector<NormKey> tracked_keys(int order) {
  std::vector<NormKey> out;
  for (int s = 0; s <= order; ++s)
    for (int l = 0; l <= s; ++l) out.push_back({s - l, l});
  return out;
}

double BumpTest::value(double t, const Point& x) const {
  double v = scale * bump1((t - t0) / rt);
  for (int k = 0; k < n && v != 0.0; ++k) v *= bump1((x[k] - x0[k]) / rx);
  return v;
}

double BumpTest::dt(double t, const Point& x) const {
  double v = scale * bump1_d((t - t0) / rt) / rt;
  for (int k = 0; k < n && v != 0.0; ++k) v *= bump1((x[k] - x0[k]) / rx);
  return v;
}

double BumpTest::dx(int axis, double t, const Point& x) const {
  double v = scale * bump1((t - t0) / rt);
  for (int k = 0; k < n && v != 0.0; ++k)
    v *= k == axis ? bump1_d((x[k] - x0[k]) / rx) / rx : bump1((x[k] - x0[k]) / rx);
  return v;
}

std::vector<BumpTest> make_battery(int n, double T, double radius, unsigned seed, int count) {
  std::mt19937_64 rng(seed);
  std::vector<BumpTest> out;
  const double rx = 0.35 * radius;
  for (int k = 0; k < count; ++k) {
    BumpTest b;
    b.n = n;
    b.rt = 0.3 * T;
    b.t0 = T * (0.35 + 0.3 * unit_uniform(rng));
    b.rx = rx;
    for (int a = 0; a < n; ++a) b.x0[a] = (radius - rx) * (2.0 * unit_uniform(rng) - 1.0);
    b.scale = 1.0 / (b.rt * std::pow(rx * bump1_mass(), n) * bump1_mass());
    out.push_back(b);
  }
  return out;
}

std::vector<double> weak_pairings(const SystemSpec& spec, const Candidate& u, const std::vector<BumpTest>& battery,
                                  double eps, int points) {
  if (has_delta_time(spec)) throw RefusalError("weak pairings need coefficients without impulsive time factors", 0.0);
  if (!spec.F.deltas.empty()) throw RefusalError("weak pairings do not support point-mass sources", 0.0);
  const int n = spec.n, m = spec.m;
  std::vector<double> gx, gw;
  gauss_legendre(points, gx, gw);
  const double fscale = spec.F.eps_power == 0.0 ? 1.0 : std::pow(eps, spec.F.eps_power);
  std::vector<double> out;
  for (const auto& b : battery) {
    CVec acc = CVec::Zero(m);
    const int ny = n == 2 ? points : 1;
    for (int it = 0; it < points; ++it) {
      const double t = b.t0 + b.rt * gx[it];
      for (int ix = 0; ix < points; ++ix)
        for (int iy = 0; iy < ny; ++iy) {
          Point x{b.x0[0] + b.rx * gx[ix], n == 2 ? b.x0[1] + b.rx * gx[iy] : 0.0};
          const double w = b.rt * gw[it] * b.rx * gw[ix] * (n == 2 ? b.rx * gw[iy] : 1.0);
          const double psi = b.value(t, x);
          if (psi == 0.0) continue;
          const CVec U = u(t, x);
          // −∂_tψ U − Σ_j ∂_j(ψAʲ) U + ψ B U − ψ F
          CVec term = -b.dt(t, x) * U;
          for (int j = 0; j < n; ++j) {
            const double fa = spec.A[j].time.rough_value(t);
            const CMat Aj = spec.A[j].spatial(x, n, eps);
            const CMat dAj = rough_derivative(spec.A[j], j, x, n, eps);
            term -= fa * (dAj * psi + Aj * b.dx(j, t, x)) * U;
          }
          if (!spec.B.is_zero()) term += psi * spec.B.time.rough_value(t) * spec.B.spatial(x, n, eps) * U;
          if (!spec.F.is_zero()) term -= psi * fscale * spec.F.time.rough_value(t) * spec.F.spatial(x, n, eps);
          acc += w * term;
        }
    }
    out.push_back(acc.norm());
  }
  return out;
}

bool SweepRow::certified() const {
  return ok && std::all_of(certs.begin(), certs.end(), [](const EnergyCertificate& c) { return c.pass; });
}

std::string Classification::label() const {
  if (kind == GrowthKind::polynomial) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "polynomial(%.2f)", N);
    return buf;
  }
  return to_string(kind);
}

std::string to_string(GrowthKind k) {
  switch (k) {
    case GrowthKind::log_type: return "log-type";
    case GrowthKind::bounded: return "bounded";
    case GrowthKind::polynomial: return "polynomial";
    case GrowthKind::indeterminate: return "indeterminate";
  }
  return "?";
}

std::vector<std::string> SweepReport::columns() const {
  std::vector<std::string> c = Ledger::columns(grid.n);
  for (const char* s : {"alpha_lens", "beta_int", "coupling"}) c.push_back(s);
  c.insert(c.end(), norm_keys.begin(), norm_keys.end());
  return c;
}

std::vector<double> SweepReport::values(const SweepRow& row) const {
  std::vector<double> v = row.ledger.row();
  if (v.empty()) v.assign(Ledger::columns(grid.n).size(), std::nan(""));
  for (double x : {row.alpha, row.beta_int, row.coupling}) v.push_back(x);
  for (const auto& k : norm_keys) {
    auto it = row.norms.find(k);
    v.push_back(it == row.norms.end() ? std::nan("") : it->second);
  }
  return v;
}

std::vector<const SweepRow*> SweepReport::valid_rows() const {
  std::vector<const SweepRow*> out;
  for (const auto& r : rows)
    if (r.certified()) out.push_back(&r);
  return out;
}

std::vector<std::pair<double, double>> SweepReport::series(const std::string& column) const {
  const auto cols = columns();
  const auto it = std::find(cols.begin(), cols.end(), column);
  if (it == cols.end()) throw std::invalid_argument("unknown sweep column '" + column + "'");
  const size_t idx = static_cast<size_t>(it - cols.begin());
  std::vector<std::pair<double, double>> out;
  for (const SweepRow* r : valid_rows()) out.emplace_back(r->eps, values(*r)[idx]);
  return out;
}

bool SweepReport::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
}

SweepPlan plan_sweep(const Scenario& sc, const std::vector<double>& eps) {
  if (eps.empty()) throw std::invalid_argument("empty eps list");
  const SystemSpec& spec = *sc.spec;
  const double e_min = *std::min_element(eps.begin(), eps.end());
  const double e_max = *std::max_element(eps.begin(), eps.end());
  const double s_min = smallest_sigma(spec, sc.law, e_min);
  const double s_max = largest_sigma(spec, sc.law, e_max);
  const double speed = spec.principal_bound();
  const double supp = std::max(spec.G.support_radius(spec.n), spec.F.is_zero() ? 0.0 : spec.F.support_radius(spec.n));
  if (sc.num.half_width <= 0.0 && !std::isfinite(supp))
    throw ConfigError("$.numerics.half_width", "data support is not compact; set half_width explicitly");
  const int cap = spec.n == 1 ? sc.num.max_cells : sc.num.max_cells_2d;

  int N = sc.num.cells;
  double L = 0.0;
  for (int iter = 0; iter < 20; ++iter) {
    L = sc.num.half_width > 0.0 ? sc.num.half_width : auto_half_width(supp, spec.T, speed, s_max, N);
    if (!std::isfinite(s_min) || 2.0 * L / N <= 0.5 * s_min || N >= cap) break;
    N = std::min(cap, static_cast<int>(std::ceil(4.0 * L / s_min / 8.0)) * 8);
  }
  const double st = smallest_time_sigma(spec, sc.law, e_min);
  SweepPlan plan;
  plan.grid = plan_time(Grid::make(spec.n, N, L), spec.T, speed, sc.num.cfl, std::isfinite(st) ? 0.5 * st : kInf);
  for (int k = 0; k <= 4; ++k) plan.snapshot_times.push_back(k * spec.T / 4.0);
  plan.keys = tracked_keys(sc.num.track_order);
  const double reach = std::min(supp + spec.T * speed, 0.8 * L);
  plan.battery = make_battery(spec.n, spec.T, std::max(reach, 4.0 * plan.grid.dx), sc.num.seed, sc.num.battery);
  return plan;
}

SweepRow run_eps(const Scenario& sc, const SweepPlan& plan, double eps) {
  const auto t_start = std::chrono::steady_clock::now();
  SweepRow row;
  row.eps = eps;
  try {
    row.sigma = sc.law.sigma(eps);
    const Mollifier moll = Mollifier::make(sc.spec->n, sc.moments);
    const RegularizedSystem reg = regularize(sc.spec, moll, sc.law, eps, plan.grid);
    row.ledger = reg.ledger;
    row.beta_int = beta_profile(reg).integral_to(sc.spec->T);
    row.coupling = coupling_product(reg);
    const auto lens = sc.lens();
    if (lens) row.alpha = alpha_lens(reg, *lens);

    SolveOptions opt;
    opt.scheme = sc.num.scheme;
    opt.snapshot_times = plan.snapshot_times;
    const SolutionTrace trace = solve(reg, opt);

    const int m = reg.m();
    for (const auto& key : plan.keys) {
      double sup = 0.0;
      for (double t : plan.snapshot_times) {
        const GridField f = key.l == 0 ? spatial_derivative(plan.grid, *trace.snapshot(t), m, key.r)
                                       : recover_time_derivative(trace, reg, key.r, key.l, t);
        sup = std::max(sup, field_l2(plan.grid, f));
      }
      row.norms[key.name()] = sup;
    }
    if (sc.num.certify_strip) row.certs.push_back(certify_strip(trace, reg, sc.spec->T));
    if (lens) row.certs.push_back(certify_lens(trace, reg, *lens));
    try {
      row.pairings = weak_pairings(
          *sc.spec, [&](double t, const Point& x) { return trace.state(t, x); }, plan.battery, eps);
    } catch (const RefusalError&) {
      row.pairings.clear();
    }
    row.snapshots = trace.snapshots;
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.cause = e.what();
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return row;
}

SweepReport run_sweep(const Scenario& sc, const std::vector<double>& eps_in, const SweepOptions& opt) {
  std::vector<double> eps = eps_in;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const SweepPlan plan = plan_sweep(sc, eps);

  SweepReport rep;
  rep.scenario = sc.name;
  rep.seed = sc.num.seed;
  rep.grid = plan.grid;
  rep.snapshot_times = plan.snapshot_times;
  rep.battery = plan.battery;
  for (const auto& k : plan.keys) rep.norm_keys.push_back(k.name());
  rep.rows.resize(eps.size());

  std::vector<size_t> todo;
  for (size_t i = 0; i < eps.size(); ++i) {
    auto it = std::find_if(opt.completed.begin(), opt.completed.end(),
                           [&](const SweepRow& r) { return r.eps == eps[i]; });
    if (it != opt.completed.end())
      rep.rows[i] = *it;
    else
      todo.push_back(i);
  }

  std::mutex mu;
  std::condition_variable cv;
  std::deque<size_t> finished;
  std::atomic<size_t> next{0};
  const int workers = std::max(1, std::min<int>(opt.jobs, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers && !todo.empty(); ++w)
    pool.emplace_back([&] {
      for (size_t k; (k = next.fetch_add(1)) < todo.size();) {
        SweepRow row = run_eps(sc, plan, eps[todo[k]]);
        std::lock_guard<std::mutex> lock(mu);
        rep.rows[todo[k]] = std::move(row);
        finished.push_back(todo[k]);
        cv.notify_one();
      }
    });
  for (size_t done = 0; done < todo.size(); ++done) {
    size_t idx;
    {
      std::unique_lock<std::mutex> lock(mu);
      cv.wait(lock, [&] { return !finished.empty(); });
      idx = finished.front();
      finished.pop_front();
    }
    if (opt.on_row) opt.on_row(rep.rows[idx]);
  }
  for (auto& t : pool) t.join();

  analyze(rep);
  return rep;
}

FitResult fit_moderateness(const std::vector<std::pair<double, double>>& series) {
  std::vector<double> x, y;
  for (const auto& [e, v] : series)
    if (v > 0.0 && std::isfinite(v)) {
      x.push_back(std::log(1.0 / e));
      y.push_back(std::log(v));
    }
  FitResult f;
  f.used = static_cast<int>(x.size());
  if (f.used < 4) {
    f.indeterminate = true;
    return f;
  }
  const Line l = line_fit(x, y);
  f.raw_slope = l.b;
  f.intercept = l.a;
  f.r2 = l.r2;
  f.N = std::max(l.b, 0.0);
  f.indeterminate = l.r2 < 0.5;
  return f;
}

FitResult fit_moderateness(const SweepReport& rep, const std::string& key) {
  return fit_moderateness(rep.series(key));
}

Classification classify_log_type(const std::vector<std::pair<double, double>>& series) {
  Classification c;
  std::vector<std::pair<double, double>> s;
  for (const auto& p : series)
    if (p.second > 0.0 && std::isfinite(p.second)) s.push_back(p);
  if (s.size() < 4) return c;
  const std::vector<double> x = log_inv(s);
  std::vector<double> y, ly;
  for (const auto& p : s) {
    y.push_back(p.second);
    ly.push_back(std::log(p.second));
  }
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  c.res_const = rel_rms(y, std::vector<double>(y.size(), mean));
  const Line lin = line_fit(x, y);
  std::vector<double> fl, fp;
  for (double xi : x) fl.push_back(lin.a + lin.b * xi);
  c.res_log = rel_rms(y, fl);
  const Line pw = line_fit(x, ly);
  for (double xi : x) fp.push_back(std::exp(pw.a + pw.b * xi));
  c.res_pow = rel_rms(y, fp);
  c.N = pw.b;

  constexpr double floor = 1e-3;
  if (c.res_const <= floor) {
    c.kind = GrowthKind::bounded;
    return c;
  }
  std::vector<std::pair<double, GrowthKind>> fits{
      {c.res_const, GrowthKind::bounded}, {c.res_log, GrowthKind::log_type}, {c.res_pow, GrowthKind::polynomial}};
  std::sort(fits.begin(), fits.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (fits[0].first <= 0.9 * fits[1].first) c.kind = fits[0].second;
  return c;
}

Classification classify_log_type(const SweepReport& rep, const std::string& key) {
  return classify_log_type(rep.series(key));
}

CauchyResult cauchy_net_check(const SweepReport& rep) {
  CauchyResult res;
  std::vector<const SweepRow*> ok;
  for (const auto& r : rep.rows)
    if (r.ok) ok.push_back(&r);
  if (ok.size() < 4) {
    res.reason = "fewer than 4 completed rows";
    return res;
  }
  double scale = 0.0;
  for (size_t k = 0; k + 1 < ok.size(); ++k) {
    const auto& a = ok[k]->snapshots;
    const auto& b = ok[k + 1]->snapshots;
    if (a.size() != b.size() || a.empty()) throw RefusalError("snapshot sets differ between rows", 0.0);
    double d = 0.0;
    for (size_t s = 0; s < a.size(); ++s) {
      if (a[s].size() != b[s].size()) throw RefusalError("snapshot grids differ between rows", 0.0);
      GridField diff(a[s].size());
      for (size_t q = 0; q < diff.size(); ++q) diff[q] = a[s][q] - b[s][q];
      d = std::max(d, field_l2(rep.grid, diff));
      scale = std::max(scale, field_l2(rep.grid, b[s]));
    }
    res.distances.push_back(d);
  }
  res.limit_eps = ok.back()->eps;
  res.limit = ok.back()->snapshots;

  const size_t w = std::min<size_t>(4, res.distances.size());
  const std::vector<double> tail(res.distances.end() - static_cast<long>(w), res.distances.end());
  const double last = tail.back();
  if (last <= 1e-12 * std::max(scale, 1e-300)) {
    res.cauchy = true;
    res.ratio = 0.0;
    res.reason = "distances at round-off level";
    return res;
  }
  bool monotone = true;
  for (size_t k = 0; k + 1 < w; ++k) monotone = monotone && tail[k + 1] <= tail[k];
  res.ratio = tail.front() > 0.0 ? std::pow(last / tail.front(), 1.0 / static_cast<double>(w - 1)) : kInf;
  res.cauchy = monotone && res.ratio <= 0.9;
  res.tail = res.ratio < 1.0 ? last * res.ratio / (1.0 - res.ratio) : kInf;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: tail ratio %.3g over the last %zu distances%s", res.cauchy ? "Cauchy" : "not Cauchy",
                res.ratio, w, monotone ? "" : ", not monotone");
  res.reason = buf;
  return res;
}

WeakResult weak_solution_check(const SweepReport& rep) {
  WeakResult w;
  if (!rep.cauchy.cauchy) {
    w.note = "skipped: no Cauchy verdict";
    return w;
  }
  const SweepRow* fin = nullptr;
  for (const auto& r : rep.rows)
    if (r.ok) fin = &r;
  if (!fin || fin->pairings.empty()) {
    w.note = "skipped: pairings unavailable for this scenario";
    return w;
  }
  w.run = true;
  w.scale = fin->ledger.G_linf;
  w.tolerance = 1e-2 * w.scale;
  w.final = fin->pairings;
  for (size_t k = 0; k < w.final.size(); ++k)
    if (w.final[k] >= w.worst) {
      w.worst = w.final[k];
      w.worst_field = static_cast<int>(k);
    }
  w.pass = w.worst <= w.tolerance;
  w.note = w.pass ? "pairings below tolerance" : "pairing above tolerance at test field " + std::to_string(w.worst_field);
  return w;
}

void analyze(SweepReport& rep) {
  rep.fits.clear();
  rep.classes.clear();
  for (const auto& col : rep.columns()) {
    const auto s = rep.series(col);
    rep.fits[col] = fit_moderateness(s);
    rep.classes[col] = classify_log_type(s);
  }
  try {
    rep.cauchy = cauchy_net_check(rep);
  } catch (const RefusalError& e) {
    rep.cauchy = CauchyResult{};
    rep.cauchy.reason = std::string("refused: ") + e.what();
  }
  rep.weak = weak_solution_check(rep);
  rep.uniformity = Uniformity{};
  if (!rep.norm_keys.empty()) {
    rep.uniformity.N00 = rep.fits[rep.norm_keys.front()].N;
    rep.uniformity.bounded = true;
    for (const auto& k : rep.norm_keys) {
      const double N = rep.fits[k].N;
      rep.uniformity.max_N = std::max(rep.uniformity.max_N, N);
      rep.uniformity.bounded = rep.uniformity.bounded && N <= rep.uniformity.N00 + 0.25;
    }
  }
  rep.coupling_slope = rep.fits["coupling"].raw_slope;
}

}  // namespace hyplens
