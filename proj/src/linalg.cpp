#include "hyplens/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hyplens {

EighResult jacobi_eigh(const CMat& input, double tol, int max_sweeps) {
  const int n = static_cast<int>(input.rows());
  CMat a = hermitian_part(input);
  CMat v = CMat::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (std::sqrt(2.0 * off) <= tol * scale) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const cplx z = a(p, q);
        const double az = std::abs(z);
        if (az <= 1e-300 || az <= 1e-18 * scale) continue;
        const cplx e = z / az;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * az);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // G = D R with D = diag(.., conj(e) at q, ..), R the real plane rotation.
        const cplx gpp = c, gpq = s, gqp = -s * std::conj(e), gqq = c * std::conj(e);
        for (int k = 0; k < n; ++k) {  // A <- A G
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * gpp + akq * gqp;
          a(k, q) = akp * gpq + akq * gqq;
        }
        for (int k = 0; k < n; ++k) {  // A <- G* A
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(gpp) * apk + std::conj(gqp) * aqk;
          a(q, k) = std::conj(gpq) * apk + std::conj(gqq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (int k = 0; k < n; ++k) {
          const cplx vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * gpp + vkq * gqp;
          v(k, q) = vkp * gpq + vkq * gqq;
        }
      }
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i).real() < a(j, j).real(); });
  EighResult out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (int k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]).real();
    out.vectors.col(k) = v.col(order[k]);
  }
  out.sweeps = sweep;
  return out;
}

double hermitian_defect(const CMat& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

double op_norm(const CMat& a) {
  if (a.size() == 0) return 0.0;
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  if (a.rows() == a.cols() && hermitian_defect(a) <= 1e-14 * scale) {
    const auto ev = jacobi_eigh(a).values;
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  }
  const auto ev = jacobi_eigh(a.adjoint() * a).values;
  return std::sqrt(std::max(ev(ev.size() - 1), 0.0));
}

double lambda_min(const CMat& a) { return jacobi_eigh(a).values(0); }

CMat expm(const CMat& a) {
  const int n = static_cast<int>(a.rows());
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.25) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.25)));
  const CMat x = a / std::ldexp(1.0, squarings);
  CMat term = CMat::Identity(n, n);
  CMat sum = term;
  for (int k = 1; k <= 16; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
  }
  for (int k = 0; k < squarings; ++k) sum = sum * sum;
  return sum;
}

CMat block_replicate(const CMat& a, int copies) {
  const auto m = a.rows();
  CMat out = CMat::Zero(m * copies, a.cols() * copies);
  for (int k = 0; k < copies; ++k) out.block(k * m, k * a.cols(), m, a.cols()) = a;
  return out;
}

}  // namespace hyplens
