#pragma once

// In-memory numerical primitives executed on single b x b tiles (or pairs of
// tiles). Every routine works on the logical window of its operands and keeps
// the zero padding intact. All kernels are single-threaded and deterministic.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "oocrr/dense_block.hpp"
#include "oocrr/errors.hpp"

namespace oocrr {

enum class GemmMode : std::uint8_t {
  tn_oz,  ///< c = a^T b
  tn_oo,  ///< c = c + a^T b
  abta,   ///< c = b^T a   (called with c aliasing a)
  aabt,   ///< c = a b^T   (called with c aliasing a)
  nn_oz,  ///< c = a b
  nn_oo,  ///< c = c + a b
};

namespace detail {

// A right factor may be a full b x b SVD factor whose live part is only as
// large as the left operand's logical columns (edge diagonal blocks); the rest
// of it must then be zero so the padded product stays inside c's window.
template <typename Scalar>
bool nn_conforms(const DenseBlock<Scalar>& a, const DenseBlock<Scalar>& b,
                 const DenseBlock<Scalar>& c) {
  if (c.rows() != a.rows()) return false;
  if (a.cols() == b.rows() && c.cols() == b.cols()) return true;
  if (a.cols() > b.rows() || c.cols() > b.cols()) return false;
  const auto& B = b.padded();
  for (Index j = 0; j < B.cols(); ++j)
    for (Index i = 0; i < B.rows(); ++i)
      if ((i >= a.cols() || j >= c.cols()) && B(i, j) != Scalar(0)) return false;
  return true;
}

}  // namespace detail

/// Tile product on the padded b x b arrays. Zero padding in the operands makes
/// the padded product equal to the logical one, and `c` may alias `a` or `b`.
template <typename Scalar>
void gemm(GemmMode mode, const DenseBlock<Scalar>& a, const DenseBlock<Scalar>& b,
          DenseBlock<Scalar>& c) {
  OOCRR_REQUIRE(a.stride() == b.stride() && b.stride() == c.stride(),
                "gemm: operands have different block sizes");
  const auto& A = a.padded();
  const auto& B = b.padded();
  auto& C = c.padded();
  Matrix<Scalar> tmp;
  switch (mode) {
    case GemmMode::tn_oz:
      OOCRR_REQUIRE(a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols(),
                    "gemm tn_oz: dimension mismatch");
      tmp.noalias() = A.transpose() * B;
      C = tmp;
      break;
    case GemmMode::tn_oo:
      OOCRR_REQUIRE(a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols(),
                    "gemm tn_oo: dimension mismatch");
      tmp.noalias() = A.transpose() * B;
      C += tmp;
      break;
    case GemmMode::nn_oz:
      OOCRR_REQUIRE(detail::nn_conforms(a, b, c), "gemm nn_oz: dimension mismatch");
      tmp.noalias() = A * B;
      C = tmp;
      break;
    case GemmMode::nn_oo:
      OOCRR_REQUIRE(detail::nn_conforms(a, b, c), "gemm nn_oo: dimension mismatch");
      tmp.noalias() = A * B;
      C += tmp;
      break;
    case GemmMode::abta:
      OOCRR_REQUIRE(c.rows() == a.rows() && c.cols() == a.cols(), "gemm abta: dimension mismatch");
      tmp.noalias() = B.transpose() * A;
      C = tmp;
      break;
    case GemmMode::aabt:
      OOCRR_REQUIRE(c.rows() == a.rows() && c.cols() == a.cols(), "gemm aabt: dimension mismatch");
      tmp.noalias() = A * B.transpose();
      C = tmp;
      break;
  }
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_key(const GaussianSeed& seed) {
  std::uint64_t k = splitmix64(seed.global_seed);
  k = splitmix64(k ^ seed.matrix);
  k = splitmix64(k ^ seed.block_row);
  return splitmix64(k ^ (seed.block_col * 0x632be59bd9b4e019ULL));
}

/// Standard normal deviate number `counter` of the stream `key`.
inline double normal_at(std::uint64_t key, std::uint64_t counter) {
  constexpr double two_m53 = 1.0 / 9007199254740992.0;
  const double u1 = static_cast<double>((splitmix64(key + 2 * counter) >> 11) + 1) * two_m53;
  const double u2 = static_cast<double>(splitmix64(key + 2 * counter + 1) >> 11) * two_m53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Householder reflector H = I - tau [1; v][1; v]^T with H [alpha; x] = [beta; 0]
/// and beta >= 0. On return alpha holds beta and x holds v.
template <typename Scalar, typename Tail>
Scalar make_householder(Scalar& alpha, Tail&& x) {
  const Scalar sigma = x.squaredNorm();
  if (sigma == Scalar(0)) {
    if (alpha >= Scalar(0)) return Scalar(0);
    alpha = -alpha;
    return Scalar(2);
  }
  const Scalar mu = std::sqrt(alpha * alpha + sigma);
  const Scalar v0 = alpha <= Scalar(0) ? alpha - mu : -sigma / (alpha + mu);
  const Scalar tau = Scalar(2) * v0 * v0 / (sigma + v0 * v0);
  x /= v0;
  alpha = mu;
  return tau;
}

/// Explicit unit lower trapezoidal W (rows x k) from reflectors stored below
/// the diagonal of `v`.
template <typename Scalar>
Matrix<Scalar> unit_lower(const DenseBlock<Scalar>& v, Index k) {
  Matrix<Scalar> w = Matrix<Scalar>::Zero(v.rows(), k);
  for (Index j = 0; j < k; ++j) {
    w(j, j) = Scalar(1);
    w.col(j).tail(v.rows() - j - 1) = v.padded().col(j).segment(j + 1, v.rows() - j - 1);
  }
  return w;
}

/// Forward column-wise accumulation of the triangular factor S such that
/// H_0 H_1 ... H_{k-1} = I - W S W^T. `gram(i, j)` must return w_i^T w_j for i < j.
template <typename Scalar, typename Gram>
void accumulate_sfactor(const Vector<Scalar>& tau, Gram&& gram, DenseBlock<Scalar>& s) {
  const Index k = tau.size();
  OOCRR_REQUIRE(s.stride() >= k, "sfactor block too small");
  auto& S = s.padded();
  S.setZero();
  for (Index j = 0; j < k; ++j) {
    S(j, j) = tau(j);
    if (j == 0 || tau(j) == Scalar(0)) continue;
    Vector<Scalar> z(j);
    for (Index i = 0; i < j; ++i) z(i) = gram(i, j);
    Vector<Scalar> y = S.topLeftCorner(j, j).template triangularView<Eigen::Upper>() * z;
    S.col(j).head(j) = -tau(j) * y;
  }
}

template <typename Scalar>
auto upper(const DenseBlock<Scalar>& s, Index k) {
  return s.padded().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
}

}  // namespace detail

/// Fills the logical window with i.i.d. standard normals keyed on (seed, entry).
template <typename Scalar>
void generate_normal_random(const GaussianSeed& seed, DenseBlock<Scalar>& out) {
  const std::uint64_t key = detail::stream_key(seed);
  out.padded().setZero();
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i)
      out(i, j) = static_cast<Scalar>(
          detail::normal_at(key, static_cast<std::uint64_t>(j) * out.stride() + i));
}

/// Householder QR of a dense tile. On return `a` holds R on and above the
/// diagonal and the reflector tails below it; `s` holds the triangular factor.
template <typename Scalar>
ReflectorPanel<Scalar> comp_dense_qr(DenseBlock<Scalar>& a, DenseBlock<Scalar>& s) {
  OOCRR_REQUIRE(a.stride() == s.stride(), "comp_dense_qr: block size mismatch");
  const Index m = a.rows(), n = a.cols(), k = std::min(m, n);
  auto& A = a.padded();
  Vector<Scalar> tau(k);
  for (Index j = 0; j < k; ++j) {
    auto tail = A.col(j).segment(j + 1, m - j - 1);
    tau(j) = detail::make_householder(A(j, j), tail);
    const Index rest = n - j - 1;
    if (tau(j) == Scalar(0) || rest == 0) continue;
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> w =
        A.row(j).segment(j + 1, rest) + tail.transpose() * A.block(j + 1, j + 1, m - j - 1, rest);
    A.row(j).segment(j + 1, rest) -= tau(j) * w;
    A.block(j + 1, j + 1, m - j - 1, rest).noalias() -= tau(j) * tail * w;
  }
  const Matrix<Scalar> W = detail::unit_lower(a, k);
  detail::accumulate_sfactor<Scalar>(
      tau, [&](Index i, Index j) { return W.col(i).dot(W.col(j)); }, s);
  return {&a, &s, PanelKind::dense};
}

/// QR of an upper-triangular tile stacked on a dense tile. Only the upper
/// triangle of `top` is read or written, so the strictly lower part may keep
/// the reflectors of an earlier dense factorization. `bot` receives the
/// reflector tails.
template <typename Scalar>
ReflectorPanel<Scalar> comp_td_qr(DenseBlock<Scalar>& top, DenseBlock<Scalar>& bot,
                                  DenseBlock<Scalar>& s) {
  OOCRR_REQUIRE(top.stride() == bot.stride() && bot.stride() == s.stride(),
                "comp_td_qr: block size mismatch");
  OOCRR_REQUIRE(top.cols() == bot.cols(), "comp_td_qr: column counts differ");
  const Index n = top.cols(), mb = bot.rows();
  OOCRR_REQUIRE(top.rows() >= n, "comp_td_qr: top block must have at least as many rows as columns");
  auto& T = top.padded();
  auto& D = bot.padded();
  Vector<Scalar> tau(n);
  for (Index j = 0; j < n; ++j) {
    auto v = D.col(j).head(mb);
    tau(j) = detail::make_householder(T(j, j), v);
    const Index rest = n - j - 1;
    if (tau(j) == Scalar(0) || rest == 0) continue;
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> w =
        T.row(j).segment(j + 1, rest) + v.transpose() * D.block(0, j + 1, mb, rest);
    T.row(j).segment(j + 1, rest) -= tau(j) * w;
    D.block(0, j + 1, mb, rest).noalias() -= tau(j) * v * w;
  }
  const auto V = D.topLeftCorner(mb, n);
  detail::accumulate_sfactor<Scalar>(
      tau, [&](Index i, Index j) { return V.col(i).dot(V.col(j)); }, s);
  return {&bot, &s, PanelKind::td};
}

/// c <- Q^T c (transpose = true) or c <- Q c for a dense panel.
template <typename Scalar>
void apply_left(const ReflectorPanel<Scalar>& panel, bool transpose, DenseBlock<Scalar>& c) {
  OOCRR_REQUIRE(panel.kind == PanelKind::dense, "apply_left: expected a dense panel");
  const auto& v = *panel.vectors;
  OOCRR_REQUIRE(c.rows() == v.rows(), "apply_left: row count mismatch");
  const Index k = panel.count();
  if (k == 0 || c.cols() == 0) return;
  const Matrix<Scalar> W = detail::unit_lower(v, k);
  auto C = c.logical();
  Matrix<Scalar> X = W.transpose() * C;
  const auto S = detail::upper(*panel.sfactor, k);
  if (transpose)
    X = S.transpose() * X;
  else
    X = S * X;
  C.noalias() -= W * X;
}

/// [ctop; cbot] <- Q^T [ctop; cbot] (or Q [...]) for a td panel. Only the first
/// `count()` rows of ctop take part.
template <typename Scalar>
void apply_left(const ReflectorPanel<Scalar>& panel, bool transpose, DenseBlock<Scalar>& ctop,
                DenseBlock<Scalar>& cbot) {
  OOCRR_REQUIRE(panel.kind == PanelKind::td, "apply_left: expected a td panel");
  const auto& v = *panel.vectors;
  const Index k = panel.count();
  OOCRR_REQUIRE(ctop.rows() >= k && cbot.rows() == v.rows() && ctop.cols() == cbot.cols(),
                "apply_left(td): dimension mismatch");
  if (k == 0 || ctop.cols() == 0) return;
  const Index n = ctop.cols();
  auto top = ctop.padded().topLeftCorner(k, n);
  auto bot = cbot.logical();
  const auto V = v.padded().topLeftCorner(v.rows(), k);
  Matrix<Scalar> X = top;
  X.noalias() += V.transpose() * bot;
  const auto S = detail::upper(*panel.sfactor, k);
  if (transpose)
    X = S.transpose() * X;
  else
    X = S * X;
  top -= X;
  bot.noalias() -= V * X;
}

/// c <- c Q for a dense panel.
template <typename Scalar>
void apply_right_q(const ReflectorPanel<Scalar>& panel, DenseBlock<Scalar>& c) {
  OOCRR_REQUIRE(panel.kind == PanelKind::dense, "apply_right_q: expected a dense panel");
  const auto& v = *panel.vectors;
  OOCRR_REQUIRE(c.cols() == v.rows(), "apply_right_q: column count mismatch");
  const Index k = panel.count();
  if (k == 0 || c.rows() == 0) return;
  const Matrix<Scalar> W = detail::unit_lower(v, k);
  auto C = c.logical();
  Matrix<Scalar> X = C * W;
  X = X * detail::upper(*panel.sfactor, k);
  C.noalias() -= X * W.transpose();
}

/// [cleft cright] <- [cleft cright] Q for a td panel. Only the first `count()`
/// columns of cleft take part.
template <typename Scalar>
void apply_right_q(const ReflectorPanel<Scalar>& panel, DenseBlock<Scalar>& cleft,
                   DenseBlock<Scalar>& cright) {
  OOCRR_REQUIRE(panel.kind == PanelKind::td, "apply_right_q: expected a td panel");
  const auto& v = *panel.vectors;
  const Index k = panel.count();
  OOCRR_REQUIRE(cleft.cols() >= k && cright.cols() == v.rows() && cleft.rows() == cright.rows(),
                "apply_right_q(td): dimension mismatch");
  if (k == 0 || cleft.rows() == 0) return;
  const Index m = cleft.rows();
  auto left = cleft.padded().topLeftCorner(m, k);
  auto right = cright.logical();
  const auto V = v.padded().topLeftCorner(v.rows(), k);
  Matrix<Scalar> X = left;
  X.noalias() += right * V;
  X = X * detail::upper(*panel.sfactor, k);
  left -= X;
  right.noalias() -= X * V.transpose();
}

template <typename Scalar>
void apply_left_qt(const ReflectorPanel<Scalar>& p, DenseBlock<Scalar>& c) {
  apply_left(p, true, c);
}
template <typename Scalar>
void apply_left_qt(const ReflectorPanel<Scalar>& p, DenseBlock<Scalar>& top,
                   DenseBlock<Scalar>& bot) {
  apply_left(p, true, top, bot);
}
template <typename Scalar>
void apply_left_q(const ReflectorPanel<Scalar>& p, DenseBlock<Scalar>& c) {
  apply_left(p, false, c);
}
template <typename Scalar>
void apply_left_q(const ReflectorPanel<Scalar>& p, DenseBlock<Scalar>& top,
                  DenseBlock<Scalar>& bot) {
  apply_left(p, false, top, bot);
}

/// First `steps` pivots of Golub's column-pivoted Householder QR of `y`.
/// Returns the full column permutation (entry k is the original index of the
/// column moved to position k). Ties go to the lowest index; downdated norms
/// are recomputed once they drop below sqrt(eps) of their reference value.
template <typename Derived>
std::vector<Index> cpqr_panel(const Eigen::MatrixBase<Derived>& y, Index steps) {
  using Scalar = typename Derived::Scalar;
  OOCRR_REQUIRE(steps >= 0 && steps <= y.cols(), "cpqr_panel: steps exceeds column count");
  Matrix<Scalar> A = y;
  const Index m = A.rows(), n = A.cols();
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  Vector<Scalar> vn1 = A.colwise().norm().transpose();
  Vector<Scalar> vn2 = vn1;
  const Scalar tol = std::sqrt(std::numeric_limits<Scalar>::epsilon());

  for (Index k = 0; k < steps; ++k) {
    Index p = k;
    for (Index j = k + 1; j < n; ++j)
      if (vn1(j) > vn1(p)) p = j;
    if (p != k) {
      A.col(k).swap(A.col(p));
      std::swap(perm[k], perm[p]);
      std::swap(vn1(k), vn1(p));
      std::swap(vn2(k), vn2(p));
    }
    if (k >= m) continue;
    auto tail = A.col(k).segment(k + 1, m - k - 1);
    const Scalar tau = detail::make_householder(A(k, k), tail);
    const Index rest = n - k - 1;
    if (tau != Scalar(0) && rest > 0) {
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> w =
          A.row(k).segment(k + 1, rest) + tail.transpose() * A.block(k + 1, k + 1, m - k - 1, rest);
      A.row(k).segment(k + 1, rest) -= tau * w;
      A.block(k + 1, k + 1, m - k - 1, rest).noalias() -= tau * tail * w;
    }
    for (Index j = k + 1; j < n; ++j) {
      if (vn1(j) == Scalar(0)) continue;
      const Scalar r = std::abs(A(k, j)) / vn1(j);
      vn1(j) *= std::sqrt(std::max(Scalar(0), (Scalar(1) - r) * (Scalar(1) + r)));
      if (vn1(j) <= tol * vn2(j)) {
        vn1(j) = A.col(j).tail(m - k - 1).norm();
        vn2(j) = vn1(j);
      }
    }
  }
  return perm;
}

namespace detail {

/// One-sided Jacobi on a tall r x c matrix (r >= c). Returns descending
/// singular values and fills u (r x r) and v (c x c) with A = U [D; 0] V^T.
template <typename Scalar>
Vector<Scalar> jacobi_svd_tall(const Matrix<Scalar>& a, Matrix<Scalar>& u, Matrix<Scalar>& v,
                               int max_sweeps) {
  const Index r = a.rows(), c = a.cols();
  Matrix<Scalar> W = a;
  v = Matrix<Scalar>::Identity(c, c);
  const Scalar tol = Scalar(1e-15) * static_cast<Scalar>(std::max<Index>(r, 1));
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (Index p = 0; p + 1 < c; ++p) {
      for (Index q = p + 1; q < c; ++q) {
        const Scalar alpha = W.col(p).squaredNorm();
        const Scalar beta = W.col(q).squaredNorm();
        const Scalar gamma = W.col(p).dot(W.col(q));
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
        const Scalar t = (zeta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (std::abs(zeta) + std::sqrt(Scalar(1) + zeta * zeta));
        const Scalar cs = Scalar(1) / std::sqrt(Scalar(1) + t * t);
        const Scalar sn = cs * t;
        for (Index i = 0; i < r; ++i) {
          const Scalar wp = W(i, p), wq = W(i, q);
          W(i, p) = cs * wp - sn * wq;
          W(i, q) = sn * wp + cs * wq;
        }
        for (Index i = 0; i < c; ++i) {
          const Scalar vp = v(i, p), vq = v(i, q);
          v(i, p) = cs * vp - sn * vq;
          v(i, q) = sn * vp + cs * vq;
        }
      }
    }
  }
  if (!converged) throw SvdConvergenceError(max_sweeps, "");

  Vector<Scalar> sigma = W.colwise().norm().transpose();
  std::vector<Index> order(c);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index x, Index y) { return sigma(x) > sigma(y); });
  Matrix<Scalar> Ws(r, c), Vs(c, c);
  Vector<Scalar> d(c);
  for (Index j = 0; j < c; ++j) {
    Ws.col(j) = W.col(order[j]);
    Vs.col(j) = v.col(order[j]);
    d(j) = sigma(order[j]);
  }
  v = std::move(Vs);

  // U from the QR of the (orthogonal-column) matrix W = A V; the non-negative
  // diagonal convention makes its leading columns W_j / sigma_j.
  DenseBlock<Scalar> wq(r, r, c), s(r, std::min(r, c), std::min(r, c));
  wq.logical() = Ws;
  const ReflectorPanel<Scalar> panel = comp_dense_qr(wq, s);
  DenseBlock<Scalar> eye(r);
  eye.logical().setIdentity();
  apply_left_q(panel, eye);
  u = eye.logical();
  return d;
}

}  // namespace detail

/// Small SVD of a tile by cyclic one-sided Jacobi (at most 30 sweeps).
/// On return `a` holds diag(D) in its logical window, `u` holds U and `vt`
/// holds V^T, both zero outside their leading square.
template <typename Scalar>
Vector<Scalar> svd_block(DenseBlock<Scalar>& a, DenseBlock<Scalar>& u, DenseBlock<Scalar>& vt) {
  OOCRR_REQUIRE(a.stride() == u.stride() && u.stride() == vt.stride(),
                "svd_block: block size mismatch");
  const Index r = a.rows(), c = a.cols();
  OOCRR_REQUIRE(u.rows() >= r && u.cols() >= r && vt.rows() >= c && vt.cols() >= c,
                "svd_block: factor blocks too small");
  constexpr int max_sweeps = 30;
  Matrix<Scalar> U, V;
  Vector<Scalar> d;
  if (r >= c) {
    d = detail::jacobi_svd_tall<Scalar>(a.logical(), U, V, max_sweeps);
  } else {
    // A^T = U' D V'^T  =>  A = V' D U'^T
    d = detail::jacobi_svd_tall<Scalar>(a.logical().transpose(), V, U, max_sweeps);
  }
  a.padded().setZero();
  for (Index i = 0; i < d.size(); ++i) a(i, i) = d(i);
  u.padded().setZero();
  u.padded().topLeftCorner(r, r) = U;
  vt.padded().setZero();
  vt.padded().topLeftCorner(c, c) = V.transpose();
  return d;
}

template <typename Scalar>
void keep_upper_triang(DenseBlock<Scalar>& a) {
  auto L = a.logical();
  for (Index j = 0; j < L.cols(); ++j)
    for (Index i = j + 1; i < L.rows(); ++i) L(i, j) = Scalar(0);
}

template <typename Scalar>
void set_to_zero(DenseBlock<Scalar>& a) {
  a.padded().setZero();
}

}  // namespace oocrr
