#include "doctest.h"
#include "generators.hpp"
#include "hyplens/linalg.hpp"

#include <Eigen/Eigenvalues>

using namespace hyplens;

TEST_CASE("jacobi eigenvalues agree with an independent Hermitian solver") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + trial % 8;
    const CMat h = gen::random_hermitian(rng, m, 2.0);
    const auto res = jacobi_eigh(h);
    Eigen::SelfAdjointEigenSolver<CMat> ref(h);
    for (int k = 0; k < m; ++k) CHECK(res.values(k) == doctest::Approx(ref.eigenvalues()(k)).epsilon(1e-10));
    const CMat recon = res.vectors * res.values.cast<cplx>().asDiagonal() * res.vectors.adjoint();
    CHECK((recon - h).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + h.norm()));
    CHECK((res.vectors.adjoint() * res.vectors - CMat::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("operator norm of non-Hermitian matrices matches singular values") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const CMat a = gen::random_matrix(rng, 1 + trial % 6);
    Eigen::JacobiSVD<CMat> svd(a);
    CHECK(op_norm(a) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-10));
  }
  CHECK(op_norm(CMat::Zero(3, 3)) == 0.0);
}

TEST_CASE("hermitian_part examples") {
  CMat skew(2, 2);
  skew << 0, 1, -1, 0;
  CHECK(hermitian_part(skew).cwiseAbs().maxCoeff() == 0.0);
  CHECK((hermitian_part(CMat::Identity(3, 3)) - CMat::Identity(3, 3)).norm() == 0.0);
  CMat b(2, 2);
  b << 0, 2, 0, 0;
  CMat expect(2, 2);
  expect << 0, 1, 1, 0;
  CHECK((hermitian_part(b) - expect).norm() == 0.0);
}

TEST_CASE("hermitian_part is idempotent, linear and reconstructs B") {
  std::mt19937_64 rng(13);
  const cplx I(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + trial % 5;
    const CMat b = gen::random_matrix(rng, m), c = gen::random_matrix(rng, m);
    const double s = gen::uniform(rng, -3, 3);
    const CMat h = hermitian_part(b);
    CHECK(hermitian_defect(h) < 1e-15);
    CHECK((hermitian_part(h) - h).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((hermitian_part(b + s * c) - h - s * hermitian_part(c)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((h + hermitian_part(I * b) * (-I) - b).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("expm matches eigen-decomposition exponential") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 1 + trial % 4;
    const CMat a = gen::random_matrix(rng, m, 0.2 + trial * 0.2);
    Eigen::ComplexEigenSolver<CMat> es(a);
    const CMat v = es.eigenvectors();
    const CMat ref = v * es.eigenvalues().array().exp().matrix().asDiagonal() * v.inverse();
    CHECK((expm(a) - ref).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + ref.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("block replication preserves operator norm and Hermitian structure") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const CMat a = gen::random_hermitian(rng, 1 + trial % 3);
    for (int copies : {1, 2, 4}) {
      const CMat big = block_replicate(a, copies);
      CHECK(op_norm(big) == doctest::Approx(op_norm(a)).epsilon(1e-12));
      CHECK(hermitian_defect(big) == 0.0);
    }
  }
}
