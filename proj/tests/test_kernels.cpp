#include <doctest.h>

#include <random>

#include "oocrr/kernels.hpp"
#include "oocrr/oracle.hpp"

using namespace oocrr;

namespace {

Matrix<double> random_matrix(Index m, Index n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Matrix<double> a(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) a(i, j) = dist(gen);
  return a;
}

Block block_of(const Matrix<double>& m, Index stride) { return Block::from(m, stride); }

// Explicit Q by applying the encoded reflectors to the identity, one column
// at a time through the unblocked definition H_0 H_1 ... H_{k-1}.
Matrix<double> explicit_q_dense(const Block& v, const Block& s) {
  const Index m = v.rows(), k = std::min(v.rows(), v.cols());
  Matrix<double> q = Matrix<double>::Identity(m, m);
  for (Index j = k - 1; j >= 0; --j) {
    Vector<double> w = Vector<double>::Zero(m);
    w(j) = 1.0;
    for (Index i = j + 1; i < m; ++i) w(i) = v(i, j);
    const double tau = s(j, j);
    q -= tau * w * (w.transpose() * q);
  }
  return q;
}

double rel(const Matrix<double>& a, const Matrix<double>& b) {
  const double n = b.norm();
  return (a - b).norm() / (n > 0 ? n : 1.0);
}

}  // namespace

TEST_CASE("gemm modes on small blocks") {
  Block a(2), b(2);
  a.logical() = Matrix<double>::Identity(2, 2);
  b.logical() << 1, 2, 3, 4;
  Block c(2);
  gemm(GemmMode::tn_oz, a, b, c);
  CHECK(c.logical() == b.logical());

  Block z(1), any(1), acc(1);
  any(0, 0) = 7;
  acc(0, 0) = 5;
  gemm(GemmMode::tn_oo, z, any, acc);
  CHECK(acc(0, 0) == 5);
}

TEST_CASE("gemm agrees with a triple loop") {
  for (const Index n : {3, 17, 64}) {
    const Matrix<double> A = random_matrix(n, n, 11 + n), B = random_matrix(n, n, 12 + n);
    Block a = block_of(A, n), b = block_of(B, n), c(n);
    gemm(GemmMode::tn_oz, a, b, c);
    const Matrix<double> ref = oracle::gemm_tn(A, B);
    const Matrix<double> mag = oracle::gemm_tn(A.cwiseAbs(), B.cwiseAbs());
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        CHECK(std::abs(c(i, j) - ref(i, j)) <= 1e-15 * std::max(1.0, mag(i, j)));
  }
}

TEST_CASE("gemm modes match Eigen products and respect padding") {
  const Index b = 8;
  const Matrix<double> A = random_matrix(5, 6, 1), B = random_matrix(5, 7, 2), Cm = random_matrix(6, 7, 3);
  Block a = block_of(A, b), bb = block_of(B, b), c = block_of(Cm, b);
  gemm(GemmMode::tn_oo, a, bb, c);
  CHECK(rel(c.logical(), Cm + A.transpose() * B) < 1e-14);
  CHECK(c.padding_is_zero());

  const Matrix<double> X = random_matrix(5, 6, 4), Y = random_matrix(6, 3, 5);
  Block x = block_of(X, b), y = block_of(Y, b), out(b, 5, 3);
  gemm(GemmMode::nn_oz, x, y, out);
  CHECK(rel(out.logical(), X * Y) < 1e-14);
  gemm(GemmMode::nn_oo, x, y, out);
  CHECK(rel(out.logical(), 2 * X * Y) < 1e-14);

  const Matrix<double> P = random_matrix(5, 5, 6), T = random_matrix(5, 4, 7);
  Block p = block_of(P, b), t = block_of(T, b);
  gemm(GemmMode::abta, t, p, t);
  CHECK(rel(t.logical(), P.transpose() * T) < 1e-14);
  const Matrix<double> Q = random_matrix(4, 4, 8);
  Block q = block_of(Q, b), t2 = block_of(T, b);
  gemm(GemmMode::aabt, t2, q, t2);
  CHECK(rel(t2.logical(), T * Q.transpose()) < 1e-14);
}

TEST_CASE("gemm rejects mismatched shapes") {
  Block a(4, 3, 2), b(4, 2, 2), c(4, 2, 2);
  CHECK_THROWS_AS(gemm(GemmMode::tn_oz, a, b, c), ContractError);
  Block d(4, 3, 3), e(4, 3, 3), f(4, 2, 3);
  CHECK_THROWS_AS(gemm(GemmMode::nn_oz, d, e, f), ContractError);
  Block g(5, 3, 3);
  CHECK_THROWS_AS(gemm(GemmMode::tn_oz, d, e, g), ContractError);
}

TEST_CASE("normal generator is keyed and deterministic") {
  GaussianSeed s{42, 1, 2, 3};
  Block x(16), y(16);
  generate_normal_random(s, x);
  generate_normal_random(s, y);
  CHECK(x == y);
  GaussianSeed other = s;
  other.block_col = 4;
  Block z(16);
  generate_normal_random(other, z);
  CHECK_FALSE(x == z);

  Block edge(16, 5, 16);
  generate_normal_random(s, edge);
  CHECK(edge.padding_is_zero());
}

TEST_CASE("normal generator moments over 10^6 samples") {
  double sum = 0, sq = 0;
  std::size_t count = 0;
  Block blk(250);
  for (std::uint64_t tag = 0; tag < 16; ++tag) {
    generate_normal_random(GaussianSeed{7, 0, tag, 0}, blk);
    for (Index j = 0; j < 250; ++j)
      for (Index i = 0; i < 250; ++i) {
        sum += blk(i, j);
        sq += blk(i, j) * blk(i, j);
        ++count;
      }
  }
  CHECK(count == 1000000);
  const double mean = sum / static_cast<double>(count);
  const double var = sq / static_cast<double>(count) - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("dense QR examples") {
  Block eye(4);
  eye.logical().setIdentity();
  Block s(4);
  comp_dense_qr(eye, s);
  CHECK(eye.logical() == Matrix<double>::Identity(4, 4));
  CHECK(s.logical().isZero(0));

  Block col(2, 2, 1);
  col(0, 0) = 3;
  col(1, 0) = 4;
  Block s2(2);
  comp_dense_qr(col, s2);
  CHECK(col(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("dense QR reconstructs its input") {
  for (const Index m : {6, 33, 64})
    for (const Index n : {4, 17, 64}) {
      if (n > m) continue;
      const Matrix<double> A = random_matrix(m, n, static_cast<unsigned>(m * 100 + n));
      Block a = block_of(A, 64), s(64);
      const auto panel = comp_dense_qr(a, s);
      const Matrix<double> Q = explicit_q_dense(a, s);
      const Matrix<double> R = a.logical().triangularView<Eigen::Upper>();
      CHECK(oracle::orthogonality_error(Q) <= 1e-13);
      CHECK(rel(Q.leftCols(n) * R.topRows(n), A) <= 1e-13);
      for (Index j = 0; j < n; ++j) CHECK(R(j, j) >= 0.0);
      CHECK(Matrix<double>(s.padded().triangularView<Eigen::StrictlyLower>()).isZero(0));

      // Compact WY agrees with the explicit product.
      Block c = block_of(random_matrix(m, 5, 99), 64);
      const Matrix<double> C0 = c.logical();
      apply_left_qt(panel, c);
      CHECK(rel(c.logical(), Q.transpose() * C0) <= 1e-13);
      apply_left_q(panel, c);
      CHECK(rel(c.logical(), C0) <= 1e-13);
    }
}

TEST_CASE("dense apply against explicit Q on 5x3") {
  const Matrix<double> A = random_matrix(5, 3, 3);
  Block a = block_of(A, 8), s(8);
  const auto panel = comp_dense_qr(a, s);
  const Matrix<double> Q = explicit_q_dense(a, s);
  const Matrix<double> B = random_matrix(4, 5, 4);
  Block right = block_of(B, 8);
  apply_right_q(panel, right);
  CHECK(rel(right.logical(), B * Q) <= 1e-13);
  CHECK(right.padding_is_zero());

  Block zero_v(8, 5, 3), zero_s(8);
  const ReflectorPanel<double> identity{&zero_v, &zero_s, PanelKind::dense};
  Block c = block_of(random_matrix(5, 2, 5), 8);
  const Block before = c;
  apply_left_qt(identity, c);
  CHECK(c == before);
}

TEST_CASE("td QR examples") {
  Block top(3), bot(3), s(3);
  top.logical().setIdentity();
  comp_td_qr(top, bot, s);
  CHECK(top.logical() == Matrix<double>::Identity(3, 3));
  CHECK(bot.logical().isZero(0));
  CHECK(s.logical().isZero(0));

  Block t1(1), b1(1), s1(1);
  t1(0, 0) = 1;
  b1(0, 0) = 1;
  comp_td_qr(t1, b1, s1);
  CHECK(t1(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("td QR matches dense QR of the stacked pair") {
  for (const Index b : {1, 5, 32}) {
    for (const Index mb : {b, b / 2 + 1}) {
      const Matrix<double> Rt = random_matrix(b, b, 21 + b).triangularView<Eigen::Upper>();
      const Matrix<double> D = random_matrix(mb, b, 22 + b);
      Block top = block_of(Rt, b), bot = block_of(D, b), s(b);
      // Garbage below the diagonal must be ignored and preserved.
      for (Index j = 0; j < b; ++j)
        for (Index i = j + 1; i < b; ++i) top(i, j) = 100.0 + static_cast<double>(i);
      const Block below = top;
      const auto panel = comp_td_qr(top, bot, s);

      Matrix<double> stacked(b + mb, b);
      stacked << Rt, D;
      const Matrix<double> Rref = stacked.householderQr().matrixQR().triangularView<Eigen::Upper>();
      for (Index j = 0; j < b; ++j) {
        CHECK(std::abs(std::abs(top(j, j)) - std::abs(Rref(j, j))) <= 1e-13 * stacked.norm());
        for (Index i = j + 1; i < b; ++i) CHECK(top(i, j) == below(i, j));
      }

      // Q^T [Rt; D] = [R; 0] via the td apply on a copy.
      Block ct = block_of(Rt, b), cb = block_of(D, b);
      apply_left_qt(panel, ct, cb);
      const Matrix<double> R = top.logical().triangularView<Eigen::Upper>();
      CHECK(rel(ct.logical(), R) <= 1e-13);
      CHECK(cb.logical().norm() <= 1e-13 * stacked.norm());

      // Agreement with a dense apply on the stacked matrix.
      Matrix<double> W = Matrix<double>::Zero(b + mb, b);
      W.topRows(b).setIdentity();
      W.bottomRows(mb) = bot.logical();
      const Matrix<double> S = s.logical().triangularView<Eigen::Upper>();
      const Matrix<double> Q = Matrix<double>::Identity(b + mb, b + mb) - W * S * W.transpose();
      CHECK(oracle::orthogonality_error(Q) <= 1e-13);
      const Index nc = std::min<Index>(3, b);
      const Matrix<double> X = random_matrix(b + mb, nc, 23);
      Block xt = block_of(X.topRows(b), b), xb = block_of(X.bottomRows(mb), b);
      apply_left_qt(panel, xt, xb);
      Matrix<double> got(b + mb, nc);
      got << xt.logical(), xb.logical();
      CHECK(rel(got, Q.transpose() * X) <= 1e-13);
      apply_left_q(panel, xt, xb);
      got << xt.logical(), xb.logical();
      CHECK(rel(got, X) <= 1e-13);

      const Matrix<double> Y = random_matrix(nc, b + mb, 24);
      Block yl = block_of(Y.leftCols(b), b), yr = block_of(Y.rightCols(mb), b);
      apply_right_q(panel, yl, yr);
      Matrix<double> gy(nc, b + mb);
      gy << yl.logical(), yr.logical();
      CHECK(rel(gy, Y * Q) <= 1e-13);
    }
  }
}

TEST_CASE("td apply with an identity panel leaves operands alone") {
  Block v(4), s(4), ct = block_of(random_matrix(4, 4, 1), 4), cb = block_of(random_matrix(4, 4, 2), 4);
  const ReflectorPanel<double> p{&v, &s, PanelKind::td};
  const Block t0 = ct, b0 = cb;
  apply_left_qt(p, ct, cb);
  CHECK(ct == t0);
  CHECK(cb == b0);
}

TEST_CASE("cpqr panel pivots") {
  Matrix<double> y = Matrix<double>::Zero(3, 3);
  y(0, 0) = 1;
  y(1, 1) = 10;
  y(2, 2) = 5;
  CHECK(cpqr_panel(y, 1).front() == 1);

  const auto ident = cpqr_panel(Matrix<double>::Identity(4, 4), 4);
  CHECK(ident == std::vector<Index>{0, 1, 2, 3});

  const Matrix<double> r = random_matrix(8, 8, 5);
  const auto perm = cpqr_panel(r, 8);
  const auto ref = oracle::cpqr(r);
  CHECK(perm == ref.perm);
  Matrix<double> ap(8, 8);
  for (Index k = 0; k < 8; ++k) ap.col(k) = r.col(perm[static_cast<std::size_t>(k)]);
  const Matrix<double> R = ap.householderQr().matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 1; k < 8; ++k) CHECK(std::abs(R(k, k)) <= std::abs(R(k - 1, k - 1)) * (1 + 1e-12));
}

TEST_CASE("cpqr panel on a wide sketch returns a full permutation") {
  const Matrix<double> y = random_matrix(4, 12, 6);
  auto perm = cpqr_panel(y, 4);
  CHECK(perm.size() == 12);
  auto sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (Index k = 0; k < 12; ++k) CHECK(sorted[static_cast<std::size_t>(k)] == k);
  const auto ref = oracle::cpqr(y);
  CHECK(std::equal(perm.begin(), perm.begin() + 4, ref.perm.begin()));
}

TEST_CASE("svd block examples") {
  Block d(3), u(3), vt(3);
  d(0, 0) = 3;
  d(1, 1) = 1;
  d(2, 2) = 2;
  const auto sig = svd_block(d, u, vt);
  CHECK(sig(0) == 3);
  CHECK(sig(1) == 2);
  CHECK(sig(2) == 1);

  Block z(4), zu(4), zv(4);
  const auto zs = svd_block(z, zu, zv);
  CHECK(zs.isZero(0));
  CHECK(zu.logical() == Matrix<double>::Identity(4, 4));
  CHECK(zv.logical() == Matrix<double>::Identity(4, 4));
}

TEST_CASE("svd block reconstruction and oracle agreement") {
  for (const Index n : {6, 32, 64}) {
    const Matrix<double> A = random_matrix(n, n, static_cast<unsigned>(300 + n));
    Block a = block_of(A, n), u(n), vt(n);
    const auto sig = svd_block(a, u, vt);
    const Matrix<double> U = u.logical(), Vt = vt.logical();
    CHECK((A - U * sig.asDiagonal() * Vt).norm() <= 1e-12 * A.norm());
    CHECK(oracle::orthogonality_error(U) <= 1e-12);
    CHECK(oracle::orthogonality_error(Vt.transpose()) <= 1e-12);
    for (Index k = 1; k < n; ++k) CHECK(sig(k) <= sig(k - 1));
    CHECK(sig.minCoeff() >= 0.0);
    const auto ref = oracle::svd(A);
    for (Index k = 0; k < n; ++k) CHECK(std::abs(sig(k) - ref.sigma(k)) <= 1e-11 * ref.sigma(k));
    // Eigenvalues of A^T A as an independent route for the 6x6 case.
    if (n == 6) {
      Eigen::SelfAdjointEigenSolver<Matrix<double>> es(A.transpose() * A);
      for (Index k = 0; k < n; ++k)
        CHECK(std::abs(sig(k) - std::sqrt(es.eigenvalues()(n - 1 - k))) <= 1e-10 * sig(k));
    }
  }
}

TEST_CASE("svd block on padded rectangular windows") {
  for (const auto& [r, c] : {std::pair<Index, Index>{5, 3}, {3, 5}, {8, 8}}) {
    const Matrix<double> A = random_matrix(r, c, static_cast<unsigned>(r * 10 + c));
    Block a = block_of(A, 8), u(8), vt(8);
    const auto sig = svd_block(a, u, vt);
    CHECK(a.padding_is_zero());
    const Matrix<double> U = u.padded().topLeftCorner(r, r), Vt = vt.padded().topLeftCorner(c, c);
    Matrix<double> D = Matrix<double>::Zero(r, c);
    for (Index k = 0; k < sig.size(); ++k) D(k, k) = sig(k);
    CHECK((A - U * D * Vt).norm() <= 1e-12 * A.norm());
    CHECK(a.logical() == D);
  }
}

TEST_CASE("triangle and zero kernels") {
  Block a(2);
  a.logical().setOnes();
  Block z = a;
  keep_upper_triang(a);
  Matrix<double> expect(2, 2);
  expect << 1, 1, 0, 1;
  CHECK(a.logical() == expect);
  keep_upper_triang(a);
  CHECK(a.logical() == expect);
  set_to_zero(z);
  CHECK(z.logical().isZero(0));
  set_to_zero(z);
  CHECK(z.logical().isZero(0));
}

TEST_CASE("kernels are bitwise deterministic") {
  const Matrix<double> A = random_matrix(16, 16, 77);
  Block a1 = block_of(A, 16), a2 = block_of(A, 16), s1(16), s2(16);
  comp_dense_qr(a1, s1);
  comp_dense_qr(a2, s2);
  CHECK(a1 == a2);
  CHECK(s1 == s2);
  Block b1 = block_of(A, 16), b2 = block_of(A, 16), u1(16), u2(16), v1(16), v2(16);
  svd_block(b1, u1, v1);
  svd_block(b2, u2, v2);
  CHECK(u1 == u2);
  CHECK(v1 == v2);
}
