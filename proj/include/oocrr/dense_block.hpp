#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "oocrr/errors.hpp"

namespace oocrr {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A b x b column-major tile with a logical rows x cols window in its
/// top-left corner. Entries outside the window are exactly zero.
template <typename Scalar>
class DenseBlock {
 public:
  DenseBlock() = default;

  DenseBlock(Index stride, Index rows, Index cols)
      : data_(Matrix<Scalar>::Zero(stride, stride)), rows_(rows), cols_(cols) {
    OOCRR_REQUIRE(stride >= 1 && rows >= 0 && cols >= 0 && rows <= stride && cols <= stride,
                  "DenseBlock: logical size exceeds stride");
  }

  /// Full square block with no padding.
  explicit DenseBlock(Index stride) : DenseBlock(stride, stride, stride) {}

  /// Copies `m` into the top-left window of a fresh zero-padded block.
  static DenseBlock from(const Eigen::Ref<const Matrix<Scalar>>& m, Index stride) {
    DenseBlock blk(stride, m.rows(), m.cols());
    blk.logical() = m;
    return blk;
  }

  Index stride() const noexcept { return data_.rows(); }
  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }

  Matrix<Scalar>& padded() noexcept { return data_; }
  const Matrix<Scalar>& padded() const noexcept { return data_; }

  auto logical() noexcept { return data_.topLeftCorner(rows_, cols_); }
  auto logical() const noexcept { return data_.topLeftCorner(rows_, cols_); }

  Scalar& operator()(Index i, Index j) { return data_(i, j); }
  Scalar operator()(Index i, Index j) const { return data_(i, j); }

  Scalar* data() noexcept { return data_.data(); }
  const Scalar* data() const noexcept { return data_.data(); }

  /// True when every entry outside the logical window is zero.
  bool padding_is_zero() const {
    for (Index j = 0; j < stride(); ++j)
      for (Index i = 0; i < stride(); ++i)
        if ((i >= rows_ || j >= cols_) && data_(i, j) != Scalar(0)) return false;
    return true;
  }

  void zero_padding() {
    const Index b = stride();
    if (rows_ < b) data_.bottomRows(b - rows_).setZero();
    if (cols_ < b) data_.rightCols(b - cols_).setZero();
  }

  friend bool operator==(const DenseBlock& a, const DenseBlock& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  Matrix<Scalar> data_;
  Index rows_ = 0;
  Index cols_ = 0;
};

using Block = DenseBlock<double>;

enum class PanelKind : std::uint8_t { dense, td };

/// Non-owning view of a compact block reflector Q = I - W S W^T.
///
/// For `dense` panels, `vectors` holds the Householder vectors strictly below
/// the diagonal (unit diagonal implied; the upper part is R and is ignored).
/// For `td` panels the reflectors have the form [e_j; w_j]; `vectors` holds
/// only the dense lower parts w_j. `sfactor` is upper triangular.
template <typename Scalar>
struct ReflectorPanel {
  const DenseBlock<Scalar>* vectors = nullptr;
  const DenseBlock<Scalar>* sfactor = nullptr;
  PanelKind kind = PanelKind::dense;

  /// Number of reflectors encoded.
  Index count() const {
    return kind == PanelKind::dense ? std::min(vectors->rows(), vectors->cols()) : vectors->cols();
  }
};

/// Key of a counter-based normal stream: the block generated from a seed is a
/// pure function of (global_seed, matrix, row, col).
struct GaussianSeed {
  std::uint64_t global_seed = 0;
  std::uint32_t matrix = 0;
  std::uint64_t block_row = 0;
  std::uint64_t block_col = 0;
};

}  // namespace oocrr
