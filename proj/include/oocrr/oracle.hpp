#pragma once

// Slow reference implementations and error metrics. Nothing here calls the
// tile kernels, so tests built on these are not circular.

#include <vector>

#include "oocrr/dense_block.hpp"

namespace oocrr::oracle {

struct Svd {
  Matrix<double> U;  ///< m x n; columns for zero singular values are zero
  Vector<double> sigma;
  Matrix<double> V;  ///< n x n
};

/// One-sided Jacobi with the (q outer, p inner) pair order and angle-based
/// rotations, run until every pair is orthogonal to 1e-15. Wide inputs are
/// handled through the transpose. Dimensions up to 1024.
Svd svd(const Matrix<double>& a);

struct Cpqr {
  Matrix<double> Q;  ///< m x m
  Matrix<double> R;  ///< m x n
  std::vector<Index> perm;
};

/// Unblocked column-pivoted Householder QR. Trailing column norms are
/// recomputed from scratch at every step; ties go to the lowest index.
Cpqr cpqr(const Matrix<double>& a);

/// Largest singular value by power iteration on A^T A from a fixed start.
double spectral_norm(const Matrix<double>& a, int max_iters = 200, double tol = 1e-10);

/// Scalar triple-loop product a^T b.
Matrix<double> gemm_tn(const Matrix<double>& a, const Matrix<double>& b);

/// ||Q^T Q - I||_F
double orthogonality_error(const Matrix<double>& q);

/// Column-permutation matrix with (A P)(:, k) = A(:, perm[k]).
Matrix<double> permutation_matrix(const std::vector<Index>& perm);

struct LowRankPoint {
  Index k = 0;
  double error = 0;       ///< ||A - A_k||_2
  double sigma_next = 0;  ///< oracle sigma_{k+1} (zero-based sigma(k))
  double ratio() const { return sigma_next > 0 ? error / sigma_next : 0.0; }
};

struct ErrorReport {
  double residual_rel = 0;
  double orth_u = 0;
  double orth_v = 0;
  std::vector<LowRankPoint> lowrank_curve;
  std::vector<double> diag_vs_sigma;  ///< | |T(k,k)| - sigma_k | / sigma_k

  double mean_diag_error(Index upto) const;
};

/// A = U T V^T with A_k = U(:, :k) T(:k, :) V^T. `sigma` holds the oracle
/// singular values of A; when null they are computed with svd().
ErrorReport verify_utv(const Matrix<double>& a, const Matrix<double>& u, const Matrix<double>& t,
                       const Matrix<double>& v, const std::vector<Index>& ranks,
                       const Vector<double>* sigma = nullptr);

/// A P = Q R with A_k = Q(:, :k) R(:k, :) P^T. The residual covers the first
/// `cols` columns of A P (all when negative), i.e. the processed part of an
/// early-stopped factorization; low-rank errors need a complete R.
ErrorReport verify_qr(const Matrix<double>& a, const Matrix<double>& q, const Matrix<double>& r,
                      const std::vector<Index>& perm, const std::vector<Index>& ranks,
                      Index cols = -1, const Vector<double>* sigma = nullptr);

}  // namespace oocrr::oracle
