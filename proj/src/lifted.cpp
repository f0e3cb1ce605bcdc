#include "hyplens/lifted.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hyplens {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

int ipow(int b, int e) {
  int r = 1;
  while (e-- > 0) r *= b;
  return r;
}

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

RegTimeFactor unit_time() {
  RegTimeFactor t;
  t.rough.type = TimeFactor::Type::constant;
  t.rough.base = 1.0;
  return t;
}

SampledField make_field(int rows, int cols, long nodes) {
  SampledField f;
  f.rows = rows;
  f.cols = cols;
  f.data.assign(nodes * rows * cols, 0.0);
  f.time = unit_time();
  return f;
}

/// Per-node I_k ⊗ X.
SampledField replicate(const SampledField& x, int copies, double scale) {
  SampledField out = make_field(x.rows * copies, x.cols * copies, static_cast<long>(x.data.size() / (x.rows * x.cols)));
  out.time = x.time;
  const long nodes = static_cast<long>(x.data.size()) / (x.rows * x.cols);
  const long osz = static_cast<long>(out.rows) * out.cols;
  for (long q = 0; q < nodes; ++q)
    store_matrix(scale * block_replicate(x.at(q), copies), out.data.data() + q * osz);
  return out;
}

double sup_abs(const GridField& f) {
  double s = 0.0;
  for (const auto& v : f) s = std::max(s, std::abs(v));
  return s;
}

/// ∇̃X with the noise estimate |D_h − D_2h| / |D_h|.
SampledField grad_field(const Grid& g, const SampledField& x, double& noise) {
  const int comps = x.rows * x.cols;
  SampledField out;
  out.rows = g.n * x.rows;
  out.cols = x.cols;
  out.time = x.time;
  out.data = grad_stack(g, x.data, comps, 1);
  const double s1 = sup_abs(out.data);
  if (s1 > 1e-12 * (1.0 + sup_abs(x.data))) {
    const GridField wide = grad_stack(g, x.data, comps, 2);
    double d = 0.0;
    for (size_t q = 0; q < wide.size(); ++q) d = std::max(d, std::abs(wide[q] - out.data[q]));
    noise = std::max(noise, d / s1);
  }
  return out;
}

SampledField add_fields(const SampledField& a, const SampledField& b, double sb = 1.0) {
  SampledField out = a;
  for (size_t q = 0; q < out.data.size(); ++q) out.data[q] += sb * b.data[q];
  return out;
}

void require_static(const RegularizedSystem& reg) {
  if (!static_coefficients(reg))
    throw RefusalError("lifted tables need time-constant coefficients; use the base recursion instead", 0.0);
}

}  // namespace

bool static_coefficients(const RegularizedSystem& reg) {
  bool ok = reg.B.time.is_constant();
  for (const auto& a : reg.A) ok = ok && a.time.is_constant();
  return ok;
}

GridField diff_axis(const Grid& g, const GridField& f, int comps, int axis, int reach) {
  const long nodes = g.nodes();
  const long s = g.stride(axis);
  GridField out(f.size(), 0.0);
  for (long q = 0; q < nodes; ++q) {
    const int c = g.n == 1 ? static_cast<int>(q) : static_cast<int>(axis == 0 ? q / g.N : q % g.N);
    long lo, hi;
    double span;
    if (c - reach >= 0 && c + reach < g.N) {
      lo = q - reach * s;
      hi = q + reach * s;
      span = 2.0 * reach * g.dx;
    } else if (c - reach < 0) {
      lo = q;
      hi = q + reach * s;
      span = reach * g.dx;
    } else {
      lo = q - reach * s;
      hi = q;
      span = reach * g.dx;
    }
    for (int k = 0; k < comps; ++k) out[q * comps + k] = (f[hi * comps + k] - f[lo * comps + k]) / span;
  }
  return out;
}

GridField grad_stack(const Grid& g, const GridField& f, int comps, int reach) {
  const long nodes = g.nodes();
  GridField out(nodes * comps * g.n);
  for (int a = 0; a < g.n; ++a) {
    const GridField d = diff_axis(g, f, comps, a, reach);
    for (long q = 0; q < nodes; ++q)
      std::copy(d.begin() + q * comps, d.begin() + (q + 1) * comps, out.begin() + (q * g.n + a) * comps);
  }
  return out;
}

GridField spatial_derivative(const Grid& g, const GridField& u, int m, int r) {
  GridField cur = u;
  int comps = m;
  for (int k = 0; k < r; ++k) {
    cur = grad_stack(g, cur, comps);
    comps *= g.n;
  }
  return cur;
}

int LiftedSystem::block() const { return ipow(n, order) * m; }

LiftedSystem lift_base(const RegularizedSystem& reg) {
  require_static(reg);
  LiftedSystem s;
  s.n = reg.n();
  s.m = reg.m();
  const long nodes = reg.grid.nodes();
  s.divA = make_field(s.m, s.m, nodes);
  for (int j = 0; j < s.n; ++j) {
    const double fa = reg.A[j].time.rough.base;
    SampledField a = reg.A[j];
    for (auto& v : a.data) v *= fa;
    a.time = unit_time();
    s.A.push_back(std::move(a));
    for (size_t q = 0; q < s.divA.data.size(); ++q) s.divA.data[q] += fa * reg.dA[j * s.n + j].data[q];
  }
  s.B = reg.B;
  for (auto& v : s.B.data) v *= reg.B.time.rough.base;
  s.B.time = unit_time();
  s.F = reg.F;
  s.G = reg.G;
  return s;
}

LiftedSystem lift_once(const LiftedSystem& sys, const RegularizedSystem& reg, double noise_limit) {
  require_static(reg);
  const Grid& g = reg.grid;
  const int n = sys.n;
  const long nodes = g.nodes();
  LiftedSystem out;
  out.order = sys.order + 1;
  out.n = n;
  out.m = sys.m;
  out.noise = sys.noise;
  const int blk = sys.block(), nblk = out.block();

  for (const auto& a : sys.A) out.A.push_back(replicate(a, n, 1.0));
  out.divA = replicate(sys.divA, n, 1.0);

  // B̃^{r+1} = I ⊗ B̃ʳ + (∂_i Ãʲ)_{ij}
  out.B = replicate(sys.B, n, 1.0);
  const int copies = blk / sys.m;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double fa = reg.A[j].time.rough.base;
      for (long q = 0; q < nodes; ++q) {
        const CMat d = fa * block_replicate(reg.dA[i * n + j].at(q), copies);
        cplx* dst = out.B.data.data() + q * nblk * nblk;
        for (int r = 0; r < blk; ++r)
          for (int c = 0; c < blk; ++c) dst[(i * blk + r) * nblk + j * blk + c] += d(r, c);
      }
    }

  double noise = 0.0;
  // C^{r+1}_k = ∇̃C^r_k + I ⊗ C^r_{k−1}; C^{r+1}_r = −∇̃B̃ʳ + I ⊗ C^r_{r−1}
  for (int k = 0; k <= sys.order; ++k) {
    SampledField ck;
    if (k < sys.order) {
      ck = grad_field(g, sys.C[k], noise);
    } else {
      ck = grad_field(g, sys.B, noise);
      for (auto& v : ck.data) v = -v;
    }
    if (k >= 1) ck = add_fields(ck, replicate(sys.C[k - 1], n, 1.0));
    out.C.push_back(std::move(ck));
  }
  out.F = grad_field(g, sys.F, noise);
  out.G = grad_field(g, sys.G, noise);
  out.noise = std::max(out.noise, noise);
  if (noise > noise_limit)
    throw RefusalError("lift to order " + std::to_string(out.order) + " is noise dominated (stencil discrepancy " +
                           fmt(noise) + " > " + fmt(noise_limit) + "); refine the grid",
                       noise);
  return out;
}

LiftedSystem lift(const RegularizedSystem& reg, int r, double noise_limit) {
  LiftedSystem s = lift_base(reg);
  for (int k = 0; k < r; ++k) s = lift_once(s, reg, noise_limit);
  return s;
}

double hermitian_part_growth(const LiftedSystem& sys) {
  const long nodes = static_cast<long>(sys.B.data.size()) / (sys.B.rows * sys.B.cols);
  double sup = 0.0;
  for (long q = 0; q < nodes; ++q) {
    const CMat b = sys.B.at(q);
    sup = std::max(sup, op_norm(sys.divA.at(q) - b - b.adjoint()));
  }
  return 1.0 + sup;
}

RegularizedSystem stacked_system(const RegularizedSystem& reg, int r, double noise_limit) {
  std::vector<LiftedSystem> levels{lift_base(reg)};
  for (int k = 0; k < r; ++k) levels.push_back(lift_once(levels.back(), reg, noise_limit));
  const int n = reg.n(), m = reg.m();
  const long nodes = reg.grid.nodes();
  std::vector<int> off{0};
  for (const auto& l : levels) off.push_back(off.back() + l.block());
  const int M = off.back(), S = M / m;

  RegularizedSystem st;
  st.spec = reg.spec;
  st.eps = reg.eps;
  st.law = reg.law;
  st.sigma = reg.sigma;
  st.grid = reg.grid;
  for (int j = 0; j < n; ++j) st.A.push_back(replicate(levels[0].A[j], S, 1.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      SampledField d = replicate(reg.dA[i * n + j], S, reg.A[j].time.rough.base);
      d.time = unit_time();
      st.dA.push_back(std::move(d));
    }
  st.B = make_field(M, M, nodes);
  for (int k = 0; k <= r; ++k) {
    const LiftedSystem& l = levels[k];
    const int bk = l.block();
    for (long q = 0; q < nodes; ++q) {
      cplx* dst = st.B.data.data() + q * M * M;
      const cplx* b = l.B.node(q);
      for (int a = 0; a < bk; ++a)
        for (int c = 0; c < bk; ++c) dst[(off[k] + a) * M + off[k] + c] = b[a * bk + c];
      for (int p = 0; p < k; ++p) {
        const int bp = levels[p].block();
        const cplx* cm = l.C[p].node(q);
        for (int a = 0; a < bk; ++a)
          for (int c = 0; c < bp; ++c) dst[(off[k] + a) * M + off[p] + c] = -cm[a * bp + c];
      }
    }
  }
  auto stack_vec = [&](auto member) {
    SampledField f = make_field(M, 1, nodes);
    f.time = (levels[0].*member).time;
    for (int k = 0; k <= r; ++k) {
      const SampledField& src = levels[k].*member;
      const int bk = levels[k].block();
      for (long q = 0; q < nodes; ++q)
        for (int a = 0; a < bk; ++a) f.data[q * M + off[k] + a] = src.data[q * bk + a];
    }
    return f;
  };
  st.F = stack_vec(&LiftedSystem::F);
  st.G = stack_vec(&LiftedSystem::G);
  st.ledger = norm_ledger(st);
  return st;
}

GridField recover_time_derivative_base(const GridField& u, const RegularizedSystem& reg, int r, int l, double t) {
  const Grid& g = reg.grid;
  const int n = reg.n(), m = reg.m();
  const long nodes = g.nodes();
  const long mm = static_cast<long>(m) * m;
  std::vector<GridField> W{u};
  std::vector<std::vector<GridField>> dW;  // ∂_j W_p
  auto grads = [&](const GridField& w) {
    std::vector<GridField> d;
    for (int j = 0; j < n; ++j) d.push_back(diff_axis(g, w, m, j));
    return d;
  };
  dW.push_back(grads(u));
  for (int qd = 1; qd <= l; ++qd) {
    GridField next(nodes * m, 0.0);
    const double fF = reg.F.time.derivative(t, qd - 1);
    for (long q = 0; q < nodes; ++q)
      for (int k = 0; k < m; ++k) next[q * m + k] = fF * reg.F.data[q * m + k];
    for (int p = 0; p <= qd - 1; ++p) {
      const double c = binom(qd - 1, p);
      const GridField& w = W[qd - 1 - p];
      const auto& dw = dW[qd - 1 - p];
      const double fb = reg.B.time.derivative(t, p);
      std::vector<double> fa(n);
      for (int j = 0; j < n; ++j) fa[j] = reg.A[j].time.derivative(t, p);
      for (long q = 0; q < nodes; ++q) {
        for (int a = 0; a < m; ++a) {
          cplx acc = 0.0;
          for (int b = 0; b < m; ++b) {
            for (int j = 0; j < n; ++j) acc += fa[j] * reg.A[j].data[q * mm + a * m + b] * dw[j][q * m + b];
            acc += fb * reg.B.data[q * mm + a * m + b] * w[q * m + b];
          }
          next[q * m + a] -= c * acc;
        }
      }
    }
    W.push_back(next);
    dW.push_back(grads(next));
  }
  return spatial_derivative(g, W[l], m, r);
}

GridField recover_time_derivative(const SolutionTrace& trace, const RegularizedSystem& reg, int r, int l, double t) {
  if (l < 1 || l > 2 || r < 0 || r > 2)
    throw RefusalError("derivative budget is r <= 2, 1 <= l <= 2 (requested r = " + std::to_string(r) +
                           ", l = " + std::to_string(l) + ")",
                       2.0);
  const GridField u = trace.state_field(t);
  if (l > 1 || r == 0 || !static_coefficients(reg)) return recover_time_derivative_base(u, reg, r, l, t);

  // ∂_t V_r = −Σ Ãʲ ∂_j V_r − B̃ʳ V_r + Σ_k C_k V_k + ∇ʳF
  const Grid& g = reg.grid;
  const int n = reg.n(), m = reg.m();
  const long nodes = g.nodes();
  const LiftedSystem sys = lift(reg, r, std::numeric_limits<double>::infinity());
  std::vector<GridField> V{u};
  for (int k = 1; k <= r; ++k) V.push_back(grad_stack(g, V.back(), ipow(n, k - 1) * m));
  const int blk = sys.block();
  const double fF = reg.F.time.value(t);
  GridField out(nodes * blk, 0.0);
  std::vector<GridField> dV;
  for (int j = 0; j < n; ++j) dV.push_back(diff_axis(g, V[r], blk, j));
  for (long q = 0; q < nodes; ++q) {
    CVec acc = fF * Eigen::Map<const CVec>(sys.F.node(q), blk);
    const CVec vr = Eigen::Map<const CVec>(V[r].data() + q * blk, blk);
    for (int j = 0; j < n; ++j) acc -= sys.A[j].at(q) * Eigen::Map<const CVec>(dV[j].data() + q * blk, blk);
    acc -= sys.B.at(q) * vr;
    for (int k = 0; k < r; ++k) {
      const int bk = ipow(n, k) * m;
      acc += sys.C[k].at(q) * Eigen::Map<const CVec>(V[k].data() + q * bk, bk);
    }
    for (int a = 0; a < blk; ++a) out[q * blk + a] = acc(a);
  }
  return out;
}

}  // namespace hyplens
