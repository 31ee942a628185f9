#include "oocrr/oracle.hpp"

#include <Eigen/Householder>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oocrr::oracle {

namespace {

constexpr Index max_dim = 1024;

Svd svd_tall(const Matrix<double>& a) {
  const Index m = a.rows(), n = a.cols();
  Matrix<double> W = a;
  Matrix<double> V = Matrix<double>::Identity(n, n);
  constexpr int max_sweeps = 100;
  bool rotated = true;
  for (int sweep = 0; sweep < max_sweeps && rotated; ++sweep) {
    rotated = false;
    for (Index q = 1; q < n; ++q) {
      for (Index p = 0; p < q; ++p) {
        double alpha = 0, beta = 0, gamma = 0;
        for (Index i = 0; i < m; ++i) {
          alpha += W(i, p) * W(i, p);
          beta += W(i, q) * W(i, q);
          gamma += W(i, p) * W(i, q);
        }
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double theta = 0.5 * std::atan2(2.0 * gamma, alpha - beta);
        const double c = std::cos(theta), s = std::sin(theta);
        for (Index i = 0; i < m; ++i) {
          const double x = W(i, p), y = W(i, q);
          W(i, p) = c * x + s * y;
          W(i, q) = -s * x + c * y;
        }
        for (Index i = 0; i < n; ++i) {
          const double x = V(i, p), y = V(i, q);
          V(i, p) = c * x + s * y;
          V(i, q) = -s * x + c * y;
        }
      }
    }
  }
  if (rotated) throw SvdConvergenceError(max_sweeps, "svd oracle");

  std::vector<double> norms(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    double s = 0;
    for (Index i = 0; i < m; ++i) s += W(i, j) * W(i, j);
    norms[static_cast<std::size_t>(j)] = std::sqrt(s);
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
    return norms[static_cast<std::size_t>(x)] > norms[static_cast<std::size_t>(y)];
  });
  Svd out;
  out.U = Matrix<double>::Zero(m, n);
  out.V.resize(n, n);
  out.sigma.resize(n);
  for (Index k = 0; k < n; ++k) {
    const Index j = order[static_cast<std::size_t>(k)];
    const double s = norms[static_cast<std::size_t>(j)];
    out.sigma(k) = s;
    out.V.col(k) = V.col(j);
    if (s > 0) out.U.col(k) = W.col(j) / s;
  }
  return out;
}

}  // namespace

Svd svd(const Matrix<double>& a) {
  OOCRR_REQUIRE(a.rows() <= max_dim && a.cols() <= max_dim, "svd oracle: dimension above 1024");
  if (a.rows() >= a.cols()) return svd_tall(a);
  Svd t = svd_tall(a.transpose());
  // A^T = U' S V'^T, so A = V' S U'^T; keep the economy shapes.
  Svd out;
  out.sigma = t.sigma;
  out.U = t.V;
  out.V = t.U;
  return out;
}

Cpqr cpqr(const Matrix<double>& a) {
  OOCRR_REQUIRE(a.rows() <= max_dim && a.cols() <= max_dim, "cpqr oracle: dimension above 1024");
  const Index m = a.rows(), n = a.cols(), steps = std::min(m, n);
  Cpqr out;
  out.R = a;
  out.Q = Matrix<double>::Identity(m, m);
  out.perm.resize(static_cast<std::size_t>(n));
  std::iota(out.perm.begin(), out.perm.end(), Index{0});
  Vector<double> essential;
  double tau = 0, beta = 0;
  Vector<double> work(std::max(m, n));
  for (Index k = 0; k < steps; ++k) {
    Index best = k;
    double best_norm = -1;
    for (Index j = k; j < n; ++j) {
      const double nj = out.R.col(j).tail(m - k).norm();
      if (nj > best_norm) {
        best_norm = nj;
        best = j;
      }
    }
    if (best != k) {
      out.R.col(k).swap(out.R.col(best));
      std::swap(out.perm[static_cast<std::size_t>(k)], out.perm[static_cast<std::size_t>(best)]);
    }
    auto col = out.R.col(k).tail(m - k);
    essential.resize(m - k - 1);
    col.makeHouseholder(essential, tau, beta);
    out.R.block(k, k, m - k, n - k).applyHouseholderOnTheLeft(essential, tau, work.data());
    out.Q.rightCols(m - k).applyHouseholderOnTheRight(essential, tau, work.data());
    out.R.col(k).tail(m - k - 1).setZero();
  }
  return out;
}

double spectral_norm(const Matrix<double>& a, int max_iters, double tol) {
  if (a.size() == 0) return 0.0;
  Vector<double> x = Vector<double>::Ones(a.cols());
  // A fixed, non-symmetric start avoids being orthogonal to the top vector
  // for structured inputs.
  for (Index i = 0; i < x.size(); ++i) x(i) += 0.5 * std::sin(1.0 + static_cast<double>(i));
  x.normalize();
  double est = 0;
  for (int it = 0; it < max_iters; ++it) {
    const Vector<double> y = a * x;
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    Vector<double> z = a.transpose() * y;
    const double nz = z.norm();
    if (nz == 0.0) return ny;
    x = z / nz;
    const double next = std::sqrt(nz);
    if (it > 0 && std::abs(next - est) <= tol * next) return next;
    est = next;
  }
  return est;
}

Matrix<double> gemm_tn(const Matrix<double>& a, const Matrix<double>& b) {
  Matrix<double> c = Matrix<double>::Zero(a.cols(), b.cols());
  for (Index i = 0; i < a.cols(); ++i)
    for (Index j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (Index k = 0; k < a.rows(); ++k) s += a(k, i) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

double orthogonality_error(const Matrix<double>& q) {
  return (q.transpose() * q - Matrix<double>::Identity(q.cols(), q.cols())).norm();
}

Matrix<double> permutation_matrix(const std::vector<Index>& perm) {
  const auto n = static_cast<Index>(perm.size());
  Matrix<double> p = Matrix<double>::Zero(n, n);
  for (Index k = 0; k < n; ++k) p(perm[static_cast<std::size_t>(k)], k) = 1.0;
  return p;
}

double ErrorReport::mean_diag_error(Index upto) const {
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(upto), diag_vs_sigma.size());
  if (n == 0) return 0.0;
  return std::accumulate(diag_vs_sigma.begin(), diag_vs_sigma.begin() + static_cast<long>(n), 0.0) /
         static_cast<double>(n);
}

namespace {

void fill_curves(ErrorReport& rep, const Matrix<double>& a, const Matrix<double>& left,
                 const Matrix<double>& middle, const Matrix<double>& right_t,
                 const std::vector<Index>& ranks, const Vector<double>& sigma) {
  for (const Index k : ranks) {
    OOCRR_REQUIRE(k >= 0 && k <= middle.rows() && k <= middle.cols(), "verify: rank out of range");
    const Matrix<double> ak = left.leftCols(k) * middle.topRows(k) * right_t;
    LowRankPoint p;
    p.k = k;
    p.error = spectral_norm(a - ak);
    p.sigma_next = k < sigma.size() ? sigma(k) : 0.0;
    rep.lowrank_curve.push_back(p);
  }
  const Index d = std::min({middle.rows(), middle.cols(), sigma.size()});
  for (Index k = 0; k < d; ++k)
    rep.diag_vs_sigma.push_back(sigma(k) > 0 ? std::abs(std::abs(middle(k, k)) - sigma(k)) / sigma(k)
                                             : std::abs(middle(k, k)));
}

}  // namespace

ErrorReport verify_utv(const Matrix<double>& a, const Matrix<double>& u, const Matrix<double>& t,
                       const Matrix<double>& v, const std::vector<Index>& ranks,
                       const Vector<double>* sigma) {
  OOCRR_REQUIRE(u.rows() == a.rows() && u.cols() == t.rows() && t.cols() == v.cols() &&
                    v.rows() == a.cols(),
                "verify_utv: dimension mismatch");
  ErrorReport rep;
  const double na = a.norm();
  rep.residual_rel = (a - u * t * v.transpose()).norm() / (na > 0 ? na : 1.0);
  rep.orth_u = orthogonality_error(u);
  rep.orth_v = orthogonality_error(v);
  const Vector<double> s = sigma ? *sigma : svd(a).sigma;
  fill_curves(rep, a, u, t, v.transpose(), ranks, s);
  return rep;
}

ErrorReport verify_qr(const Matrix<double>& a, const Matrix<double>& q, const Matrix<double>& r,
                      const std::vector<Index>& perm, const std::vector<Index>& ranks, Index cols,
                      const Vector<double>* sigma) {
  OOCRR_REQUIRE(q.rows() == a.rows() && q.cols() == r.rows() && r.cols() == a.cols() &&
                    static_cast<Index>(perm.size()) == a.cols(),
                "verify_qr: dimension mismatch");
  const Index c = cols < 0 ? a.cols() : std::min(cols, a.cols());
  ErrorReport rep;
  const Matrix<double> P = permutation_matrix(perm);
  const Matrix<double> ap = a * P;
  const double na = a.norm();
  rep.residual_rel = (ap.leftCols(c) - q * r.leftCols(c)).norm() / (na > 0 ? na : 1.0);
  rep.orth_u = orthogonality_error(q);
  rep.orth_v = 0.0;
  const Vector<double> s = sigma ? *sigma : svd(a).sigma;
  fill_curves(rep, a, q, r, P.transpose(), ranks, s);
  return rep;
}

}  // namespace oocrr::oracle
