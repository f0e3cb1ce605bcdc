#include "hyplens/solver.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hyplens {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

template <class Body>
void for_nodes(long count, Body&& body) {
  tbb::parallel_for(tbb::blocked_range<long>(0, count, 2048), [&](const tbb::blocked_range<long>& r) {
    for (long i = r.begin(); i != r.end(); ++i) body(i);
  });
}

/// out += s · M v for an m×m row-major block.
inline void matvec_acc(const cplx* M, const cplx* v, cplx* out, int m, cplx s) {
  for (int r = 0; r < m; ++r) {
    cplx acc = 0.0;
    for (int c = 0; c < m; ++c) acc += M[r * m + c] * v[c];
    out[r] += s * acc;
  }
}

struct AxisData {
  long stride = 1;
  std::vector<cplx> A, P, M, half;  // half: coefficient at i + ½ along the axis
  const RegTimeFactor* time = nullptr;
};

class Stepper {
 public:
  Stepper(const RegularizedSystem& reg, Scheme scheme) : reg_(reg), g_(reg.grid), m_(reg.m()), scheme_(scheme) {
    nodes_ = g_.nodes();
    const long mm = static_cast<long>(m_) * m_;
    for (int a = 0; a < g_.n; ++a) {
      AxisData ax;
      ax.stride = g_.stride(a);
      ax.time = &reg.A[a].time;
      ax.A = reg.A[a].data;
      if (scheme_ == Scheme::upwind_split) {
        ax.P.assign(nodes_ * mm, 0.0);
        ax.M.assign(nodes_ * mm, 0.0);
        for_nodes(nodes_, [&](long i) {
          const CMat a_i = reg.A[a].at(i);
          const auto e = jacobi_eigh(a_i);
          const Eigen::VectorXd pos = e.values.cwiseMax(0.0), neg = e.values.cwiseMin(0.0);
          store_matrix(e.vectors * pos.asDiagonal() * e.vectors.adjoint(), ax.P.data() + i * mm);
          store_matrix(e.vectors * neg.asDiagonal() * e.vectors.adjoint(), ax.M.data() + i * mm);
        });
      }
      if (scheme_ == Scheme::lax_wendroff) {
        ax.half.assign(nodes_ * mm, 0.0);
        for (long i = 0; i < nodes_; ++i) {
          const bool last = coord(i, a) == g_.N - 1;
          for (long r = 0; r < mm; ++r)
            ax.half[i * mm + r] = last ? ax.A[i * mm + r] : 0.5 * (ax.A[i * mm + r] + ax.A[(i + ax.stride) * mm + r]);
        }
      }
      axes_.push_back(std::move(ax));
    }
    has_b_ = std::any_of(reg.B.data.begin(), reg.B.data.end(), [](cplx v) { return v != 0.0; });
    has_f_ = std::any_of(reg.F.data.begin(), reg.F.data.end(), [](cplx v) { return v != 0.0; });
    tmp_.assign(nodes_ * m_, 0.0);
  }

  int coord(long idx, int axis) const {
    if (g_.n == 1) return static_cast<int>(idx);
    return static_cast<int>(axis == 0 ? idx / g_.N : idx % g_.N);
  }

  void step(GridField& u, double t, double h) {
    source_steps(u, t, t + 0.5 * h);
    if (g_.n == 1) {
      transport(u, 0, h, t + 0.5 * h);
    } else {
      transport(u, 0, 0.5 * h, t + 0.25 * h);
      transport(u, 1, h, t + 0.5 * h);
      transport(u, 0, 0.5 * h, t + 0.75 * h);
    }
    source_steps_rev(u, t + 0.5 * h, t + h);
  }

  /// (u1 − u0)/h + Σ Aʲ D_j ū + B̄ ū − F̄ at interior nodes; zero on the outer ring.
  void residual(const GridField& u0, const GridField& u1, double t, double h, GridField& out) const {
    out.assign(nodes_ * m_, 0.0);
    const double tm = t + 0.5 * h;
    const long mm = static_cast<long>(m_) * m_;
    const double bbar = has_b_ ? reg_.B.time.integral(t, t + h) / h : 0.0;
    const double fbar = has_f_ ? reg_.F.time.integral(t, t + h) / h : 0.0;
    std::vector<double> fa(g_.n);
    for (int a = 0; a < g_.n; ++a) fa[a] = axes_[a].time->value(tm);
    for_nodes(nodes_, [&](long i) {
      for (int a = 0; a < g_.n; ++a) {
        const int c = coord(i, a);
        if (c < 1 || c > g_.N - 2) return;
      }
      cplx* r = out.data() + i * m_;
      std::vector<cplx> ubar(m_), d(m_);
      for (int k = 0; k < m_; ++k) {
        r[k] = (u1[i * m_ + k] - u0[i * m_ + k]) / h;
        ubar[k] = 0.5 * (u0[i * m_ + k] + u1[i * m_ + k]);
      }
      for (int a = 0; a < g_.n; ++a) {
        const long s = axes_[a].stride;
        for (int k = 0; k < m_; ++k)
          d[k] = 0.25 * (u0[(i + s) * m_ + k] + u1[(i + s) * m_ + k] - u0[(i - s) * m_ + k] - u1[(i - s) * m_ + k]) /
                 g_.dx;
        matvec_acc(axes_[a].A.data() + i * mm, d.data(), r, m_, fa[a]);
      }
      if (has_b_) matvec_acc(reg_.B.data.data() + i * mm, ubar.data(), r, m_, bbar);
      if (has_f_)
        for (int k = 0; k < m_; ++k) r[k] -= fbar * reg_.F.data[i * m_ + k];
    });
  }

 private:
  void source_steps(GridField& u, double t0, double t1) {
    b_step(u, t0, t1);
    f_step(u, t0, t1);
  }
  void source_steps_rev(GridField& u, double t0, double t1) {
    f_step(u, t0, t1);
    b_step(u, t0, t1);
  }

  /// Exact flow of U' = −b(t) B(x) U: the factors commute in time.
  void b_step(GridField& u, double t0, double t1) {
    if (!has_b_) return;
    const double I = reg_.B.time.integral(t0, t1);
    if (I == 0.0) return;
    const long mm = static_cast<long>(m_) * m_;
    if (!(I == e_key_)) {
      e_cache_.assign(nodes_ * mm, 0.0);
      for_nodes(nodes_, [&](long i) { store_matrix(expm(-I * reg_.B.at(i)), e_cache_.data() + i * mm); });
      e_key_ = I;
    }
    for_nodes(nodes_, [&](long i) {
      cplx v[16];
      std::vector<cplx> big;
      cplx* w = v;
      if (m_ > 16) {
        big.assign(m_, 0.0);
        w = big.data();
      }
      for (int k = 0; k < m_; ++k) w[k] = 0.0;
      matvec_acc(e_cache_.data() + i * mm, u.data() + i * m_, w, m_, 1.0);
      for (int k = 0; k < m_; ++k) u[i * m_ + k] = w[k];
    });
  }

  void f_step(GridField& u, double t0, double t1) {
    if (!has_f_) return;
    const double J = reg_.F.time.integral(t0, t1);
    if (J == 0.0) return;
    for (long q = 0; q < nodes_ * m_; ++q) u[q] += J * reg_.F.data[q];
  }

  void transport(GridField& u, int a, double h, double tm) {
    const AxisData& ax = axes_[a];
    const double f = ax.time->value(tm);
    if (f == 0.0) return;
    const double lam = h / g_.dx;
    const long mm = static_cast<long>(m_) * m_;
    const long s = ax.stride;
    const int N = g_.N;
    for_nodes(nodes_, [&](long i) {
      const int c = coord(i, a);
      const cplx* ui = u.data() + i * m_;
      std::vector<cplx> up(m_, 0.0), um(m_, 0.0), dp(m_), dm(m_);
      if (c + 1 < N)
        for (int k = 0; k < m_; ++k) up[k] = u[(i + s) * m_ + k];
      if (c > 0)
        for (int k = 0; k < m_; ++k) um[k] = u[(i - s) * m_ + k];
      cplx* out = tmp_.data() + i * m_;
      switch (scheme_) {
        case Scheme::upwind_split: {
          for (int k = 0; k < m_; ++k) {
            out[k] = ui[k];
            dm[k] = ui[k] - um[k];
            dp[k] = up[k] - ui[k];
          }
          const cplx* pos = (f > 0 ? ax.P : ax.M).data() + i * mm;
          const cplx* neg = (f > 0 ? ax.M : ax.P).data() + i * mm;
          matvec_acc(pos, dm.data(), out, m_, -lam * f);
          matvec_acc(neg, dp.data(), out, m_, -lam * f);
          break;
        }
        case Scheme::lax_friedrichs: {
          for (int k = 0; k < m_; ++k) {
            out[k] = 0.5 * (up[k] + um[k]);
            dp[k] = up[k] - um[k];
          }
          matvec_acc(ax.A.data() + i * mm, dp.data(), out, m_, -0.5 * lam * f);
          break;
        }
        case Scheme::lax_wendroff: {
          for (int k = 0; k < m_; ++k) {
            out[k] = ui[k];
            dp[k] = up[k] - um[k];
          }
          matvec_acc(ax.A.data() + i * mm, dp.data(), out, m_, -0.5 * lam * f);
          // A_i [A_{i+½}(u₊ − u) − A_{i−½}(u − u₋)]
          std::vector<cplx> flux(m_, 0.0), a1(m_), a2(m_);
          for (int k = 0; k < m_; ++k) {
            a1[k] = up[k] - ui[k];
            a2[k] = ui[k] - um[k];
          }
          matvec_acc(ax.half.data() + i * mm, a1.data(), flux.data(), m_, 1.0);
          const cplx* hm = c > 0 ? ax.half.data() + (i - s) * mm : ax.A.data() + i * mm;
          matvec_acc(hm, a2.data(), flux.data(), m_, -1.0);
          matvec_acc(ax.A.data() + i * mm, flux.data(), out, m_, 0.5 * lam * lam * f * f);
          break;
        }
      }
    });
    u.swap(tmp_);
  }

  const RegularizedSystem& reg_;
  const Grid& g_;
  int m_;
  Scheme scheme_;
  long nodes_ = 0;
  std::vector<AxisData> axes_;
  bool has_b_ = false, has_f_ = false;
  std::vector<cplx> e_cache_;
  double e_key_ = std::numeric_limits<double>::quiet_NaN();
  GridField tmp_;
};

double boundary_layer_max(const Grid& g, const GridField& u, int m) {
  double mx = 0.0;
  const long nodes = g.nodes();
  for (long i = 0; i < nodes; ++i) {
    bool edge = false;
    for (int a = 0; a < g.n; ++a) {
      const int c = g.n == 1 ? static_cast<int>(i) : static_cast<int>(a == 0 ? i / g.N : i % g.N);
      edge = edge || c < 2 || c > g.N - 3;
    }
    if (!edge) continue;
    for (int k = 0; k < m; ++k) mx = std::max(mx, std::abs(u[i * m + k]));
  }
  return mx;
}

/// Index of the last element ≤ t in a sorted vector (clamped).
size_t bracket(const std::vector<double>& ts, double t) {
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  if (it == ts.begin()) return 0;
  return static_cast<size_t>(it - ts.begin()) - 1;
}

CVec blend(const Grid& g, int m, const std::vector<double>& ts, const std::vector<GridField>& fs, double t,
           const Point& x) {
  if (fs.empty()) return CVec::Zero(m);
  const size_t k = bracket(ts, t);
  if (k + 1 >= fs.size() || t <= ts[k]) return sample_field(g, fs[k], m, x);
  const double w = (t - ts[k]) / (ts[k + 1] - ts[k]);
  return (1.0 - w) * sample_field(g, fs[k], m, x) + w * sample_field(g, fs[k + 1], m, x);
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::lax_friedrichs: return "lax_friedrichs";
    case Scheme::upwind_split: return "upwind_split";
    case Scheme::lax_wendroff: return "lax_wendroff";
  }
  return "?";
}

Scheme parse_scheme(const std::string& s) {
  if (s == "lax_friedrichs") return Scheme::lax_friedrichs;
  if (s == "upwind_split" || s == "upwind") return Scheme::upwind_split;
  if (s == "lax_wendroff") return Scheme::lax_wendroff;
  throw std::invalid_argument("unknown scheme '" + s + "' (lax_friedrichs | upwind_split | lax_wendroff)");
}

int nominal_order(Scheme s) { return s == Scheme::lax_wendroff ? 2 : 1; }

CVec sample_field(const Grid& g, const GridField& f, int m, const Point& x) {
  CVec out = CVec::Zero(m);
  int base[2] = {0, 0};
  double frac[2] = {0.0, 0.0};
  for (int a = 0; a < g.n; ++a) {
    const double s = (x[a] + g.L) / g.dx - 0.5;
    base[a] = static_cast<int>(std::floor(s));
    frac[a] = s - base[a];
  }
  const int corners = g.n == 1 ? 2 : 4;
  for (int c = 0; c < corners; ++c) {
    int idx[2] = {0, 0};
    double w = 1.0;
    bool inside = true;
    for (int a = 0; a < g.n; ++a) {
      const int bit = (c >> a) & 1;
      idx[a] = base[a] + bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
      inside = inside && idx[a] >= 0 && idx[a] < g.N;
    }
    if (!inside || w == 0.0) continue;
    const long flat = g.n == 1 ? idx[0] : static_cast<long>(idx[0]) * g.N + idx[1];
    for (int k = 0; k < m; ++k) out(k) += w * f[flat * m + k];
  }
  return out;
}

double field_l2(const Grid& g, const GridField& f) {
  double s = 0.0;
  for (const auto& v : f) s += std::norm(v);
  return std::sqrt(s * g.cell_volume());
}

CVec SolutionTrace::state(double t, const Point& x) const { return blend(grid, m, frame_times, frames, t, x); }

CVec SolutionTrace::residual(double t, const Point& x) const {
  return blend(grid, m, residual_times, residuals, t, x);
}

GridField SolutionTrace::state_field(double t) const {
  if (const GridField* s = snapshot(t)) return *s;
  const size_t k = bracket(frame_times, t + 1e-12 * T);
  if (k + 1 >= frames.size() || std::abs(t - frame_times[k]) <= 1e-12 * T) return frames[k];
  const double w = (t - frame_times[k]) / (frame_times[k + 1] - frame_times[k]);
  GridField out(frames[k].size());
  for (size_t q = 0; q < out.size(); ++q) out[q] = (1.0 - w) * frames[k][q] + w * frames[k + 1][q];
  return out;
}

double SolutionTrace::pu_l2_squared(double t) const {
  if (t <= 0.0) return 0.0;
  const size_t k = bracket(step_times, t);
  if (k + 1 >= step_times.size()) return pu_l2_cum.back();
  const double w = (t - step_times[k]) / (step_times[k + 1] - step_times[k]);
  return pu_l2_cum[k] + w * (pu_l2_cum[k + 1] - pu_l2_cum[k]);
}

double SolutionTrace::l2_at(double t) const {
  const size_t k = bracket(step_times, t);
  if (k + 1 >= step_times.size() || t <= step_times[k]) return step_l2[k];
  const double w = (t - step_times[k]) / (step_times[k + 1] - step_times[k]);
  return (1.0 - w) * step_l2[k] + w * step_l2[k + 1];
}

double SolutionTrace::strip_l2_squared(double t) const {
  double acc = 0.0;
  for (size_t k = 0; k + 1 < step_times.size(); ++k) {
    const double a = step_times[k], b = step_times[k + 1];
    if (a >= t) break;
    const double fa = step_l2[k] * step_l2[k], fb = step_l2[k + 1] * step_l2[k + 1];
    if (b <= t) {
      acc += 0.5 * (b - a) * (fa + fb);
    } else {
      const double w = (t - a) / (b - a);
      acc += 0.5 * (t - a) * (fa + (fa + w * (fb - fa)));
    }
  }
  return acc;
}

const GridField* SolutionTrace::snapshot(double t) const {
  for (size_t k = 0; k < snapshot_times.size(); ++k)
    if (std::abs(snapshot_times[k] - t) <= 1e-9 * std::max(1.0, T)) return &snapshots[k];
  return nullptr;
}

Grid plan_time(Grid grid, double T, double speed, double cfl, double max_dt) {
  double dt = speed > 0.0 ? cfl * grid.dx / speed : T;
  dt = std::min(dt, max_dt);
  int steps = static_cast<int>(std::ceil(T / dt / 4.0 - 1e-12)) * 4;
  steps = std::max(steps, 4);
  grid.steps = steps;
  grid.dt = T / steps;
  return grid;
}

double auto_half_width(double support, double T, double speed, double sigma_max, int N, double pad) {
  if (N <= 16) throw std::invalid_argument("grid needs more than 16 cells per axis");
  const double need = pad * (support + T * speed + sigma_max);
  // L ≥ need + 4·(2L/N)
  return need / (1.0 - 8.0 / N);
}

SolutionTrace solve(const RegularizedSystem& reg, const SolveOptions& opt) {
  const Grid& g = reg.grid;
  const SystemSpec& spec = *reg.spec;
  if (!(g.dt > 0.0) || g.steps <= 0) throw std::invalid_argument("grid has no time step; call plan_time first");
  const double speed = reg.max_speed();
  const double cfl = g.cfl(speed);
  if (cfl > opt.cfl_limit + 1e-12)
    throw RefusalError("CFL number " + fmt(cfl) + " exceeds " + fmt(opt.cfl_limit) + "; need dt <= " +
                           fmt(opt.cfl_limit * g.dx / speed),
                       opt.cfl_limit * g.dx / speed);

  const int m = reg.m();
  const long nodes = g.nodes();
  SolutionTrace tr;
  tr.grid = g;
  tr.m = m;
  tr.scheme = opt.scheme;
  tr.cfl = cfl;
  tr.eps = reg.eps;
  tr.T = spec.T;

  GridField u(reg.G.data.begin(), reg.G.data.end());
  Stepper stepper(reg, opt.scheme);

  const double frame_bytes = static_cast<double>(nodes) * m * sizeof(cplx);
  const long max_frames = std::max<long>(2, static_cast<long>(opt.store_budget_bytes / frame_bytes));
  const int stride = static_cast<int>(std::max<long>(1, (g.steps + max_frames - 1) / max_frames));

  const Ledger& led = reg.ledger;
  const double bound2 = opt.growth_factor * std::exp(spec.T + led.div_l1inf) *
                        (led.G_l2 * led.G_l2 + led.F_l2 * led.F_l2);
  double f_sup = 0.0;
  for (const auto& v : reg.F.data) f_sup = std::max(f_sup, std::abs(v));
  const double scale = std::max(led.G_linf, f_sup * reg.F.time.integral(0.0, spec.T));
  const double guard = opt.guard_tol * scale;

  std::vector<int> snap_steps;
  for (double ts : opt.snapshot_times) {
    const int k = static_cast<int>(std::lround(ts / g.dt));
    snap_steps.push_back(std::clamp(k, 0, g.steps));
  }
  auto record = [&](int k, double t, const GridField& state) {
    tr.step_times.push_back(t);
    const double l2 = field_l2(g, state);
    tr.step_l2.push_back(l2);
    if (!std::isfinite(l2) || l2 * l2 > bound2 * (1.0 + 1e-12) + 1e-300)
      throw SchemeFailure("norm growth beyond the energy bound at t = " + fmt(t) + " (scheme " +
                          to_string(opt.scheme) + ", eps = " + fmt(reg.eps) + ")");
    if (opt.guard_support && guard >= 0.0) {
      const double edge = boundary_layer_max(g, state, m);
      if (edge > guard)
        throw RefusalError("solution reached the 2dx boundary layer at t = " + fmt(t) + " (|U| = " + fmt(edge) +
                               "); enlarge the half-width L = " + fmt(g.L),
                           g.L * 1.25);
    }
    if (k % stride == 0 || k == g.steps) {
      tr.frame_times.push_back(t);
      tr.frames.push_back(state);
    }
    for (size_t s = 0; s < snap_steps.size(); ++s)
      if (snap_steps[s] == k) {
        tr.snapshot_times.push_back(opt.snapshot_times[s]);
        tr.snapshots.push_back(state);
      }
  };

  record(0, 0.0, u);
  tr.pu_l2_cum.push_back(0.0);
  GridField prev, res;
  double res2 = 0.0;
  for (int k = 0; k < g.steps; ++k) {
    const double t = k * g.dt;
    prev = u;
    stepper.step(u, t, g.dt);
    stepper.residual(prev, u, t, g.dt, res);
    const double rn = field_l2(g, res);
    res2 += g.dt * rn * rn;
    const double fbar = reg.F.time.integral(t, t + g.dt) / g.dt;
    double pu2 = 0.0;
    for (long q = 0; q < nodes * m; ++q) pu2 += std::norm(res[q] + fbar * reg.F.data[q]);
    tr.pu_l2_cum.push_back(tr.pu_l2_cum.back() + g.dt * pu2 * g.cell_volume());
    if (k % stride == 0) {
      tr.residual_times.push_back(t + 0.5 * g.dt);
      tr.residuals.push_back(res);
    }
    record(k + 1, (k + 1 == g.steps) ? spec.T : (k + 1) * g.dt, u);
  }
  tr.residual_l2 = std::sqrt(res2);
  return tr;
}

ResidualReport residual_norm(const SolutionTrace& tr, const std::vector<TestField>& battery) {
  ResidualReport rep;
  rep.l2 = tr.residual_l2;
  const Grid& g = tr.grid;
  const long nodes = g.nodes();
  for (const auto& psi : battery) {
    CVec acc = CVec::Zero(tr.m);
    for (size_t i = 0; i < tr.residuals.size(); ++i) {
      const double w = (i + 1 < tr.frame_times.size() ? tr.frame_times[i + 1] : tr.T) - tr.frame_times[i];
      const double t = tr.residual_times[i];
      for (long q = 0; q < nodes; ++q) {
        const double p = psi(t, g.point(q));
        if (p == 0.0) continue;
        for (int k = 0; k < tr.m; ++k) acc(k) += w * g.cell_volume() * p * tr.residuals[i][q * tr.m + k];
      }
    }
    rep.pairings.push_back(acc.norm());
  }
  return rep;
}

double residual_of(const RegularizedSystem& reg, const std::function<CVec(double, const Point&)>& U, double dt) {
  const Grid& g = reg.grid;
  const int m = reg.m();
  const double T = reg.spec->T;
  const int steps = std::max(1, static_cast<int>(std::lround(T / dt)));
  const double h = T / steps;
  Stepper st(reg, Scheme::upwind_split);
  auto sample = [&](double t) {
    GridField f(g.nodes() * m);
    for (long q = 0; q < g.nodes(); ++q) {
      const CVec v = U(t, g.point(q));
      for (int k = 0; k < m; ++k) f[q * m + k] = v(k);
    }
    return f;
  };
  GridField a = sample(0.0), b, res;
  double acc = 0.0;
  for (int k = 0; k < steps; ++k) {
    b = sample((k + 1) * h);
    st.residual(a, b, k * h, h, res);
    const double rn = field_l2(g, res);
    acc += h * rn * rn;
    a.swap(b);
  }
  return std::sqrt(acc);
}

}  // namespace hyplens
