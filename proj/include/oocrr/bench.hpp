#pragma once

// Test-matrix generators, benchmark records and Gantt rendering of traces.

#include <iosfwd>
#include <string>
#include <vector>

#include "oocrr/runtime.hpp"

namespace oocrr {

enum class GenKind : std::uint8_t { randn, expdecay, diag, rank };

struct GenSpec {
  GenKind kind = GenKind::randn;
  double rate = 20;             ///< expdecay: sigma_j = exp(-j / rate)
  std::vector<double> values;   ///< diag: leading diagonal entries
  Index rank = 0;               ///< rank: number of unit singular values
};

/// "randn" | "expdecay[:rate]" | "diag:v0,v1,..." | "rank:r"
GenSpec parse_gen(const std::string& text);

/// Q factor of a seeded Gaussian m x n matrix (orthonormal columns).
Matrix<double> random_orthonormal(Index m, Index n, std::uint64_t seed);

/// m x n matrix of the requested kind. expdecay and rank are U diag(s) V^T with
/// seeded random orthonormal factors, so they are built in memory.
Matrix<double> generate_dense(const GenSpec& spec, Index m, Index n, std::uint64_t seed);

/// Writes the matrix to `path`. randn is streamed block by block from the
/// counter-based generator and never held in memory as a whole.
OocMatrix generate_matrix(const GenSpec& spec, Index m, Index n, Index b, std::uint64_t seed,
                          const fs::path& path);

struct BenchRecord {
  std::string algorithm;
  Index n = 0;
  Index b = 0;
  int q = 0;
  std::string dispatcher;
  std::size_t cache_blocks = 0;
  double wall_seconds = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  double io_seconds = 0;
  double compute_seconds = 0;

  /// wall * 1e10 / n^3
  double scaled_time() const;

  static const char* csv_header();
  std::string csv_row() const;
};

BenchRecord make_record(std::string algorithm, Index n, Index b, int q, Dispatcher d,
                        std::size_t cache_blocks, const IoStats& stats);

/// Appends one row, writing the header first when the file is new or empty.
void append_csv(const fs::path& path, const BenchRecord& rec);

struct GanttSummary {
  std::int64_t span_ns = 0;     ///< first start to last end over all events
  std::int64_t io_busy_ns = 0;  ///< union of read/write intervals
  std::int64_t compute_busy_ns = 0;

  double io_fraction() const { return span_ns > 0 ? double(io_busy_ns) / double(span_ns) : 0.0; }
  double compute_fraction() const {
    return span_ns > 0 ? double(compute_busy_ns) / double(span_ns) : 0.0;
  }
};

GanttSummary summarize(const std::vector<TraceEvent>& events);

/// Two lanes of `width` cells: reads 'R', writes 'W', computes '#', idle '.'.
/// An empty trace renders as an empty string.
std::string render_gantt_text(const std::vector<TraceEvent>& events, int width = 100);

/// Same two lanes as SVG rectangles with the event label as a tooltip.
std::string render_gantt_svg(const std::vector<TraceEvent>& events, int width = 1000);

}  // namespace oocrr
