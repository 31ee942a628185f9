#include <doctest.h>

#include "oocrr/bench.hpp"
#include "oocrr/kernels.hpp"
#include "oocrr/oracle.hpp"
#include "test_util.hpp"

using namespace oocrr;

TEST_CASE("oracle svd: examples") {
  SUBCASE("diagonal") {
    Matrix<double> a = Matrix<double>::Zero(3, 3);
    a(0, 0) = 1;
    a(1, 1) = 5;
    a(2, 2) = 3;
    const auto s = oracle::svd(a);
    CHECK(s.sigma(0) == doctest::Approx(5));
    CHECK(s.sigma(1) == doctest::Approx(3));
    CHECK(s.sigma(2) == doctest::Approx(1));
  }
  SUBCASE("orthogonal input") {
    const Matrix<double> q = random_orthonormal(20, 20, 3);
    const auto s = oracle::svd(q);
    CHECK((s.sigma.array() - 1.0).abs().maxCoeff() <= 1e-13);
  }
  SUBCASE("tall, wide and reconstruction") {
    for (auto [m, n] : {std::pair{30, 12}, {12, 30}}) {
      const Matrix<double> a = testutil::random_matrix(m, n, 6);
      const auto s = oracle::svd(a);
      const Matrix<double> rec = s.U * s.sigma.asDiagonal() * s.V.transpose();
      CHECK((rec - a).norm() <= 1e-13 * a.norm());
      for (Index k = 1; k < s.sigma.size(); ++k) CHECK(s.sigma(k) <= s.sigma(k - 1));
    }
  }
  SUBCASE("agrees with svd_block") {
    const Matrix<double> a = testutil::random_matrix(32, 32, 12);
    Block blk = Block::from(a, 32), u(32), vt(32);
    const Vector<double> d = svd_block(blk, u, vt);
    const Vector<double> ref = oracle::svd(a).sigma;
    CHECK(((d - ref).array().abs() / ref.array()).maxCoeff() <= 1e-11);
  }
  SUBCASE("too large") { CHECK_THROWS_AS(oracle::svd(Matrix<double>::Zero(1025, 2)), ContractError); }
}

TEST_CASE("oracle cpqr") {
  SUBCASE("first pivot is the largest column") {
    Matrix<double> a = Matrix<double>::Zero(3, 3);
    a(0, 0) = 1;
    a(1, 1) = 10;
    a(2, 2) = 5;
    const auto c = oracle::cpqr(a);
    CHECK(c.perm == std::vector<Index>{1, 2, 0});
  }
  SUBCASE("residual and monotone diagonal over random draws") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Matrix<double> a = testutil::random_matrix(64, 64, 1000 + seed);
      const auto c = oracle::cpqr(a);
      const Matrix<double> ap = a * oracle::permutation_matrix(c.perm);
      CHECK((ap - c.Q * c.R).norm() <= 1e-13 * a.norm());
      CHECK(oracle::orthogonality_error(c.Q) <= 1e-13);
      bool mono = true;
      for (Index k = 1; k < 64; ++k) mono = mono && std::abs(c.R(k, k)) <= std::abs(c.R(k - 1, k - 1));
      CHECK(mono);
    }
  }
  SUBCASE("rectangular") {
    const Matrix<double> a = testutil::random_matrix(10, 25, 1);
    const auto c = oracle::cpqr(a);
    CHECK((a * oracle::permutation_matrix(c.perm) - c.Q * c.R).norm() <= 1e-13 * a.norm());
  }
}

TEST_CASE("spectral norm, triple loop and permutation helpers") {
  const Matrix<double> a = testutil::random_matrix(40, 30, 2);
  CHECK(oracle::spectral_norm(a) == doctest::Approx(oracle::svd(a).sigma(0)).epsilon(1e-9));
  CHECK(oracle::spectral_norm(Matrix<double>::Zero(4, 4)) == 0.0);
  const Matrix<double> b = testutil::random_matrix(40, 7, 3);
  CHECK((oracle::gemm_tn(a, b) - a.transpose() * b).cwiseAbs().maxCoeff() <= 1e-12);
  const Matrix<double> p = oracle::permutation_matrix({2, 0, 1});
  const Matrix<double> x = testutil::random_matrix(3, 3, 1);
  CHECK((x * p).col(0) == x.col(2));
  CHECK((x * p).col(1) == x.col(0));
}

TEST_CASE("verify: low-rank curve") {
  const Index n = 40, r = 6;
  const Matrix<double> a = generate_dense(parse_gen("rank:6"), n, n, 5);
  const auto s = oracle::svd(a);
  const Matrix<double> t = s.sigma.asDiagonal();
  // U from the oracle has zero columns past the rank; complete it so that the
  // residual and orthogonality are meaningful.
  const Matrix<double> u = oracle::cpqr(s.U.leftCols(r)).Q;
  Matrix<double> uu = u;
  uu.leftCols(r) = s.U.leftCols(r);
  const auto rep = oracle::verify_utv(a, uu, t, s.V, {0, 3, 6, 10});
  CHECK(rep.residual_rel <= 1e-12);
  REQUIRE(rep.lowrank_curve.size() == 4);
  CHECK(rep.lowrank_curve[0].error == doctest::Approx(oracle::spectral_norm(a)).epsilon(1e-9));
  CHECK(rep.lowrank_curve[1].ratio() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.lowrank_curve[2].error <= 1e-12 * a.norm());
  CHECK(rep.lowrank_curve[3].error <= 1e-12 * a.norm());
  CHECK(rep.orth_u <= 1e-12);
  CHECK(rep.orth_v <= 1e-12);
  const auto again = oracle::verify_utv(a, uu, t, s.V, {0, 3, 6, 10});
  CHECK(again.residual_rel == rep.residual_rel);
  CHECK(again.lowrank_curve[1].error == rep.lowrank_curve[1].error);
  CHECK_THROWS_AS(oracle::verify_utv(a, uu, t, s.V.topRows(3), {}), ContractError);
}

TEST_CASE("verify_qr against the oracle CPQR") {
  const Matrix<double> a = testutil::random_matrix(30, 30, 8);
  const auto c = oracle::cpqr(a);
  const auto rep = oracle::verify_qr(a, c.Q, c.R, c.perm, {0, 10});
  CHECK(rep.residual_rel <= 1e-13);
  CHECK(rep.lowrank_curve[0].ratio() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.lowrank_curve[1].ratio() >= 1.0 - 1e-9);
  CHECK(rep.diag_vs_sigma.size() == 30);
}
