#pragma once

// On-disk blocked matrices (.oocb) and the instrumented block transfer layer
// shared by every dispatcher.
//
// File layout, all little-endian:
//   offset  0  char[4] magic "OOCB"
//   offset  4  u32     version (1)
//   offset  8  u32     element type (0 = IEEE-754 binary64)
//   offset 12  u32     reserved (0)
//   offset 16  u64     m (rows)
//   offset 24  u64     n (cols)
//   offset 32  u64     b (block size)
//   offset 40  M*N slots of b*b*8 bytes, column-block-major: slot (i, j) sits at
//              40 + (j*M + i) * b*b*8 and stores the tile column-major,
//              zero-padded to b x b.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "oocrr/dense_block.hpp"

namespace oocrr {

namespace fs = std::filesystem;

class FileHandle;

class OocMatrix {
 public:
  static constexpr std::uint64_t header_size = 40;
  static constexpr std::uint32_t format_version = 1;
  static constexpr std::uint32_t element_f64 = 0;

  OocMatrix() = default;

  /// Creates (or truncates) `path` with a header and zero-filled slots.
  static OocMatrix create(const fs::path& path, Index m, Index n, Index b);
  static OocMatrix open(const fs::path& path);

  const fs::path& path() const noexcept { return path_; }
  Index rows() const noexcept { return m_; }
  Index cols() const noexcept { return n_; }
  Index block_size() const noexcept { return b_; }
  Index block_rows() const noexcept { return (m_ + b_ - 1) / b_; }
  Index block_cols() const noexcept { return (n_ + b_ - 1) / b_; }
  std::uint32_t element_type() const noexcept { return element_type_; }
  bool valid() const noexcept { return static_cast<bool>(file_); }

  std::uint64_t slot_bytes() const noexcept { return static_cast<std::uint64_t>(b_ * b_) * 8; }
  std::uint64_t offset(Index i, Index j) const;
  std::uint64_t file_size() const noexcept {
    return header_size + static_cast<std::uint64_t>(block_rows() * block_cols()) * slot_bytes();
  }

  Index block_logical_rows(Index i) const { return std::min(b_, m_ - i * b_); }
  Index block_logical_cols(Index j) const { return std::min(b_, n_ - j * b_); }

  /// Zero block shaped like slot (i, j).
  Block make_block(Index i, Index j) const;

  /// Raw whole-slot transfers; no accounting.
  void read_slot(Index i, Index j, Block& out) const;
  void write_slot(Index i, Index j, const Block& blk) const;

 private:
  void check_index(Index i, Index j) const;

  fs::path path_;
  Index m_ = 0, n_ = 0, b_ = 0;
  std::uint32_t element_type_ = element_f64;
  std::shared_ptr<FileHandle> file_;
};

using MatrixId = std::uint32_t;

struct BlockId {
  MatrixId matrix = 0;
  Index i = 0;
  Index j = 0;

  friend bool operator==(const BlockId&, const BlockId&) = default;
  friend auto operator<=>(const BlockId&, const BlockId&) = default;
};

struct BlockIdHash {
  std::size_t operator()(const BlockId& id) const noexcept {
    std::uint64_t h = id.matrix;
    h = h * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(id.i);
    h = h * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(id.j);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

enum class EventKind : std::uint8_t { read, write, compute };

const char* to_string(EventKind k);

struct TraceEvent {
  EventKind kind = EventKind::compute;
  std::string label;
  std::string block;  ///< "(mat,i,j)"
  std::int64_t t_start_ns = 0;
  std::int64_t t_end_ns = 0;

  std::int64_t duration_ns() const noexcept { return t_end_ns - t_start_ns; }
};

struct IoStats {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::int64_t wall_ns = 0;
  std::vector<TraceEvent> events;

  std::uint64_t io_operations() const noexcept { return reads + writes; }
  std::int64_t compute_ns() const;
  std::int64_t io_ns() const;

  IoStats& operator+=(const IoStats& other);
};

/// Thread-safe accumulator for IoStats. Timestamps are relative to the last
/// reset().
class IoRecorder {
 public:
  IoRecorder() { reset(); }

  void reset();
  std::int64_t now_ns() const;
  void record(EventKind kind, std::string label, std::string block, std::int64_t t0,
              std::int64_t t1, std::uint64_t bytes);
  IoStats snapshot() const;
  void set_keep_events(bool keep) {
    std::lock_guard lock(mutex_);
    keep_events_ = keep;
  }

 private:
  mutable std::mutex mutex_;
  std::chrono::steady_clock::time_point epoch_;
  IoStats stats_;
  bool keep_events_ = true;
};

/// Registry of the matrices a computation touches plus the accounted
/// Read_block / Write_block primitives. Scratch matrices hold transient
/// workspace whose final contents are never needed after a run.
class BlockStore {
 public:
  MatrixId add(std::string name, OocMatrix matrix, bool scratch = false);

  std::size_t size() const noexcept { return entries_.size(); }
  const OocMatrix& matrix(MatrixId id) const { return entry(id).matrix; }
  const std::string& name(MatrixId id) const { return entry(id).name; }
  bool scratch(MatrixId id) const { return entry(id).scratch; }
  MatrixId find(const std::string& name) const;

  bool valid(const BlockId& id) const;
  std::string describe(const BlockId& id) const;
  Block make_block(const BlockId& id) const;

  Block read_block(const BlockId& id);
  void read_block(const BlockId& id, Block& out);
  void write_block(const BlockId& id, const Block& blk);

  IoRecorder& recorder() noexcept { return recorder_; }
  const IoRecorder& recorder() const noexcept { return recorder_; }

  /// Fixed extra latency added to every block transfer (test knob).
  void set_io_delay(std::chrono::microseconds delay) noexcept { io_delay_ = delay; }
  std::chrono::microseconds io_delay() const noexcept { return io_delay_; }

 private:
  struct Entry {
    std::string name;
    OocMatrix matrix;
    bool scratch = false;
  };
  const Entry& entry(MatrixId id) const;
  void delay() const;

  std::vector<Entry> entries_;
  IoRecorder recorder_;
  std::chrono::microseconds io_delay_{0};
};

/// Writes an in-memory matrix into a new .oocb file.
OocMatrix import_dense(const Eigen::Ref<const Matrix<double>>& a, const fs::path& path, Index b);
/// Reads the m x n logical entries of a matrix; padding is never exported.
Matrix<double> export_dense(const OocMatrix& a);

/// Flat row-major binary64 (little-endian) file <-> .oocb.
OocMatrix import_raw(const fs::path& raw, Index m, Index n, const fs::path& path, Index b);
void export_raw(const OocMatrix& a, const fs::path& raw);

/// Builds a matrix block by block from `fill(i, j, block)`.
OocMatrix generate_blocks(const fs::path& path, Index m, Index n, Index b,
                          const std::function<void(Index, Index, Block&)>& fill);

/// Copies the whole file (header and slots) without block accounting.
OocMatrix copy_matrix(const OocMatrix& src, const fs::path& dst);

/// Rewrites `src` with block size `b`, streaming one target tile at a time.
OocMatrix reblock(const OocMatrix& src, const fs::path& dst, Index b);

}  // namespace oocrr
