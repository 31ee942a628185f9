#pragma once

#include <chrono>
#include <optional>

#include "oocrr/runtime.hpp"

namespace oocrr {

struct RandUtvConfig {
  int power_iters = 0;
  bool build_uv = false;
  std::uint64_t seed = 0;
  Dispatcher dispatcher = Dispatcher::traditional;
  /// Cache size in blocks; 0 holds every block the run touches.
  std::size_t cache_blocks = 0;
  std::chrono::microseconds io_delay{0};
  /// Output files are <prefix>.T.oocb, .U.oocb, .V.oocb; empty derives the
  /// prefix from the input path.
  fs::path output_prefix;
  bool keep_scratch = false;
  /// Runs only the first `task_limit` tasks of the list (0 = all). For
  /// inspecting the runtime on a prefix; the outputs are then partial.
  std::size_t task_limit = 0;
};

/// Matrices the randUTV task list refers to. `z` is only needed when q > 0,
/// `u` and `v` only when U and V are built.
struct UtvLayout {
  Index block_rows = 0;  ///< M
  Index block_cols = 0;  ///< N
  MatrixId t = 0;        ///< working copy of A, becomes T
  MatrixId g = 0;        ///< Gaussian sketch, M x 1 blocks
  MatrixId y = 0;        ///< sample matrix, N x 1 blocks
  std::optional<MatrixId> z;  ///< power-iteration buffer, M x 1 blocks
  MatrixId b = 0;        ///< S factors of the Y panel, N x 1 blocks
  MatrixId c = 0;        ///< S factors of the T panel, M x 1 blocks
  MatrixId p = 0;        ///< left SVD factor, one block
  MatrixId q = 0;        ///< transposed right SVD factor, one block
  std::optional<MatrixId> u;
  std::optional<MatrixId> v;
};

/// Records the algorithm-by-blocks randUTV as a task list. Requires M >= N.
TaskList plan_randutv(const BlockStore& store, const UtvLayout& layout, int power_iters,
                      std::uint64_t seed);

struct UtvResult {
  OocMatrix t;
  std::optional<OocMatrix> u;
  std::optional<OocMatrix> v;
  IoStats stats;
  std::size_t tasks = 0;
};

UtvResult randutv(const OocMatrix& a, const RandUtvConfig& cfg);

/// |T(k,k)| for k < n, in diagonal order (monotone only within each block).
Vector<double> singular_value_estimates(const UtvResult& result);

/// Unpivoted algorithm-by-blocks Householder QR: R overwrites `a` (with the
/// reflectors below the diagonal) and the S factor of tile (p, k) lands in
/// block (p, k) of `s`.
TaskList plan_qr(const BlockStore& store, MatrixId a, MatrixId s);

struct QrResult {
  OocMatrix r;
  OocMatrix s;
  IoStats stats;
  std::size_t tasks = 0;
};

QrResult qr_ab(const OocMatrix& a, Dispatcher dispatcher, std::size_t cache_blocks,
               std::chrono::microseconds io_delay, const fs::path& output_prefix = {});

/// Default cache size: every block of every matrix in the store.
std::size_t total_blocks(const BlockStore& store);

/// <dir>/<stem> of an input file, used to name outputs.
fs::path default_prefix(const fs::path& input);

}  // namespace oocrr
