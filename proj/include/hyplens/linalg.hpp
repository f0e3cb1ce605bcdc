#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace hyplens {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Eigen-decomposition of a Hermitian matrix: values ascending, columns of `vectors` orthonormal.
struct EighResult {
  Eigen::VectorXd values;
  CMat vectors;
  int sweeps = 0;
};

/// Cyclic Jacobi iteration for Hermitian matrices. Only the Hermitian part of `a` is used.
EighResult jacobi_eigh(const CMat& a, double tol = 1e-12, int max_sweeps = 60);

/// Largest entrywise magnitude of a − a*.
double hermitian_defect(const CMat& a);

/// (a + a*) / 2.
CMat hermitian_part(const CMat& a);

/// Operator (spectral) norm. Hermitian input uses its eigenvalues, otherwise those of a*a.
double op_norm(const CMat& a);

/// Smallest eigenvalue of a Hermitian matrix.
double lambda_min(const CMat& a);

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
CMat expm(const CMat& a);

/// Kronecker product I_k ⊗ a (block-diagonal replication).
CMat block_replicate(const CMat& a, int copies);

/// Row-major flat storage of one m×m matrix per node.
inline CMat load_matrix(const cplx* p, int rows, int cols) {
  CMat out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out(r, c) = p[r * cols + c];
  return out;
}

inline void store_matrix(const CMat& a, cplx* p) {
  const auto rows = a.rows(), cols = a.cols();
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) p[r * cols + c] = a(r, c);
}

}  // namespace hyplens
