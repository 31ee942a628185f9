#pragma once

// Randomized column-pivoted QR (HQRRP) of an out-of-core matrix.
//
// Every iteration sketches the trailing matrix with a fresh Gaussian G,
// picks b pivots by classical CPQR on the small sample Y = G R22 and factors
// the pivoted panel with a dense QR on the diagonal block followed by td QRs
// down the block column. Variants differ in how the trailing matrix lives on
// disk:
//   left   A is never modified. Trailing updates are recomputed on the fly
//          from the stored panels, and only the finished panel is written.
//   rip    right-looking, trailing matrix rewritten every iteration, column
//          permutation kept logical (the file holds R P^T).
//   rpp    right-looking with physical column swaps.

#include <chrono>
#include <optional>
#include <vector>

#include "oocrr/runtime.hpp"

namespace oocrr {

enum class HqrrpVariant : std::uint8_t { left, right_in_place, right_physical };

/// "left" | "rip" | "rpp"
HqrrpVariant parse_variant(const std::string& name);
const char* to_string(HqrrpVariant v);

struct HqrrpConfig {
  /// Must match the input file; 0 takes it from the file.
  Index block_size = 0;
  /// Columns to process, rounded up to a multiple of b; 0 processes all.
  Index stop_cols = 0;
  HqrrpVariant variant = HqrrpVariant::left;
  bool build_q = false;
  std::uint64_t seed = 0;
  Dispatcher dispatcher = Dispatcher::traditional;
  /// LRU capacity for cache/overlap; 0 holds every block.
  std::size_t cache_blocks = 0;
  std::chrono::microseconds io_delay{0};
  /// Outputs are <prefix>.R.oocb, .S.oocb and .Q.oocb.
  fs::path output_prefix;
};

struct HqrrpResult {
  HqrrpVariant variant = HqrrpVariant::left;
  /// R on and above the diagonal, reflector tails below it. Column k of the
  /// factorization is stored at column perm[k] for rip and at k otherwise.
  OocMatrix r;
  /// S factor of tile (p, k) in block (p, k).
  OocMatrix s;
  /// Column k of A P is column perm[k] of A.
  std::vector<Index> perm;
  std::optional<OocMatrix> q_matrix;
  Index processed_cols = 0;
  IoStats stats;
};

HqrrpResult hqrrp(const OocMatrix& a, const HqrrpConfig& cfg);

/// R of A P = Q R in logical column order with the reflectors cleared.
/// Columns past processed_cols hold whatever the variant left there.
Matrix<double> r_factor(const HqrrpResult& result);

/// Gaussian sketch block for block row p of iteration `iter`: b x rows.
Block sketch_block(std::uint64_t seed, Index iter, Index p, Index b, Index rows);

/// Sketches every column of `trailing` (Y = G trailing, G assembled from
/// sketch_block(seed, iter, p, ...)) and returns the column permutation chosen
/// by `steps` steps of CPQR on Y; its first `steps` entries are the pivots.
std::vector<Index> select_pivots(const OocMatrix& trailing, Index steps, std::uint64_t seed,
                                 Index iter = 0);

struct ProbePoint {
  Index n = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_read = 0;
};

/// Factors seeded n x n Gaussian matrices for each size with the traditional
/// dispatcher and reports the bytes moved. Files go to `dir`.
std::vector<ProbePoint> write_complexity_probe(HqrrpVariant variant, const std::vector<Index>& sizes,
                                               Index b, std::uint64_t seed, const fs::path& dir);

}  // namespace oocrr
