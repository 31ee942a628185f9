#include "oocrr/block_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <thread>

static_assert(std::endian::native == std::endian::little,
              "the .oocb format is little-endian; big-endian hosts are not supported");

namespace oocrr {

class FileHandle {
 public:
  FileHandle(const fs::path& path, int flags) : path_(path) {
    fd_ = ::open(path.c_str(), flags | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError(path.string() + ": " + std::strerror(errno));
  }
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;
  ~FileHandle() {
    if (fd_ >= 0) ::close(fd_);
  }

  void pread_all(void* buf, std::size_t len, std::uint64_t off) const {
    auto* p = static_cast<char*>(buf);
    while (len > 0) {
      const ssize_t got = ::pread(fd_, p, len, static_cast<off_t>(off));
      if (got < 0 && errno == EINTR) continue;
      if (got <= 0)
        throw IoError(path_.string() + ": short read at offset " + std::to_string(off) +
                      (got < 0 ? std::string(": ") + std::strerror(errno) : std::string()));
      p += got;
      len -= static_cast<std::size_t>(got);
      off += static_cast<std::uint64_t>(got);
    }
  }

  void pwrite_all(const void* buf, std::size_t len, std::uint64_t off) const {
    const auto* p = static_cast<const char*>(buf);
    while (len > 0) {
      const ssize_t put = ::pwrite(fd_, p, len, static_cast<off_t>(off));
      if (put < 0 && errno == EINTR) continue;
      if (put <= 0)
        throw IoError(path_.string() + ": short write at offset " + std::to_string(off) +
                      (put < 0 ? std::string(": ") + std::strerror(errno) : std::string()));
      p += put;
      len -= static_cast<std::size_t>(put);
      off += static_cast<std::uint64_t>(put);
    }
  }

  void truncate(std::uint64_t size) const {
    if (::ftruncate(fd_, static_cast<off_t>(size)) != 0)
      throw IoError(path_.string() + ": " + std::strerror(errno));
  }

 private:
  fs::path path_;
  int fd_ = -1;
};

namespace {

struct Header {
  char magic[4];
  std::uint32_t version;
  std::uint32_t element_type;
  std::uint32_t reserved;
  std::uint64_t m;
  std::uint64_t n;
  std::uint64_t b;
};
static_assert(sizeof(Header) == OocMatrix::header_size);

}  // namespace

OocMatrix OocMatrix::create(const fs::path& path, Index m, Index n, Index b) {
  OOCRR_REQUIRE(m >= 1 && n >= 1 && b >= 1, "create: m, n and b must be positive");
  OocMatrix a;
  a.path_ = path;
  a.m_ = m;
  a.n_ = n;
  a.b_ = b;
  a.file_ = std::make_shared<FileHandle>(path, O_RDWR | O_CREAT | O_TRUNC);
  Header h{};
  std::memcpy(h.magic, "OOCB", 4);
  h.version = format_version;
  h.element_type = element_f64;
  h.m = static_cast<std::uint64_t>(m);
  h.n = static_cast<std::uint64_t>(n);
  h.b = static_cast<std::uint64_t>(b);
  a.file_->pwrite_all(&h, sizeof h, 0);
  // Sparse extension reads back as zeros.
  a.file_->truncate(a.file_size());
  return a;
}

OocMatrix OocMatrix::open(const fs::path& path) {
  OocMatrix a;
  a.path_ = path;
  a.file_ = std::make_shared<FileHandle>(path, O_RDWR);
  Header h{};
  a.file_->pread_all(&h, sizeof h, 0);
  if (std::memcmp(h.magic, "OOCB", 4) != 0) throw IoError(path.string() + ": not an .oocb file");
  if (h.version != format_version)
    throw IoError(path.string() + ": unsupported format version " + std::to_string(h.version));
  if (h.element_type != element_f64)
    throw ContractError(path.string() + ": unsupported element type " +
                        std::to_string(h.element_type));
  if (h.m == 0 || h.n == 0 || h.b == 0) throw IoError(path.string() + ": corrupt header");
  a.m_ = static_cast<Index>(h.m);
  a.n_ = static_cast<Index>(h.n);
  a.b_ = static_cast<Index>(h.b);
  a.element_type_ = h.element_type;
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec || size != a.file_size())
    throw IoError(path.string() + ": file length does not match header");
  return a;
}

void OocMatrix::check_index(Index i, Index j) const {
  OOCRR_REQUIRE(valid(), "OocMatrix: no file attached");
  if (i < 0 || j < 0 || i >= block_rows() || j >= block_cols())
    throw ContractError(path_.string() + ": block (" + std::to_string(i) + "," +
                        std::to_string(j) + ") out of range");
}

std::uint64_t OocMatrix::offset(Index i, Index j) const {
  check_index(i, j);
  return header_size + static_cast<std::uint64_t>(j * block_rows() + i) * slot_bytes();
}

Block OocMatrix::make_block(Index i, Index j) const {
  check_index(i, j);
  return Block(b_, block_logical_rows(i), block_logical_cols(j));
}

void OocMatrix::read_slot(Index i, Index j, Block& out) const {
  const auto off = offset(i, j);
  if (out.stride() != b_ || out.rows() != block_logical_rows(i) ||
      out.cols() != block_logical_cols(j))
    out = make_block(i, j);
  file_->pread_all(out.data(), slot_bytes(), off);
}

void OocMatrix::write_slot(Index i, Index j, const Block& blk) const {
  const auto off = offset(i, j);
  OOCRR_REQUIRE(blk.stride() == b_, "write_block: block stride differs from matrix block size");
  file_->pwrite_all(blk.data(), slot_bytes(), off);
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::read: return "read";
    case EventKind::write: return "write";
    case EventKind::compute: return "compute";
  }
  return "?";
}

std::int64_t IoStats::compute_ns() const {
  std::int64_t s = 0;
  for (const auto& e : events)
    if (e.kind == EventKind::compute) s += e.duration_ns();
  return s;
}

std::int64_t IoStats::io_ns() const {
  std::int64_t s = 0;
  for (const auto& e : events)
    if (e.kind != EventKind::compute) s += e.duration_ns();
  return s;
}

IoStats& IoStats::operator+=(const IoStats& other) {
  reads += other.reads;
  writes += other.writes;
  bytes_read += other.bytes_read;
  bytes_written += other.bytes_written;
  wall_ns += other.wall_ns;
  events.insert(events.end(), other.events.begin(), other.events.end());
  return *this;
}

void IoRecorder::reset() {
  std::lock_guard lock(mutex_);
  epoch_ = std::chrono::steady_clock::now();
  stats_ = IoStats{};
}

std::int64_t IoRecorder::now_ns() const {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                              epoch_)
      .count();
}

void IoRecorder::record(EventKind kind, std::string label, std::string block, std::int64_t t0,
                        std::int64_t t1, std::uint64_t bytes) {
  std::lock_guard lock(mutex_);
  if (kind == EventKind::read) {
    ++stats_.reads;
    stats_.bytes_read += bytes;
  } else if (kind == EventKind::write) {
    ++stats_.writes;
    stats_.bytes_written += bytes;
  }
  if (keep_events_)
    stats_.events.push_back({kind, std::move(label), std::move(block), t0, t1});
}

IoStats IoRecorder::snapshot() const {
  std::lock_guard lock(mutex_);
  IoStats s = stats_;
  s.wall_ns = now_ns();
  return s;
}

MatrixId BlockStore::add(std::string name, OocMatrix matrix, bool scratch) {
  OOCRR_REQUIRE(matrix.valid(), "BlockStore::add: matrix has no file");
  entries_.push_back({std::move(name), std::move(matrix), scratch});
  return static_cast<MatrixId>(entries_.size() - 1);
}

const BlockStore::Entry& BlockStore::entry(MatrixId id) const {
  OOCRR_REQUIRE(id < entries_.size(), "BlockStore: unknown matrix id " + std::to_string(id));
  return entries_[id];
}

MatrixId BlockStore::find(const std::string& name) const {
  for (std::size_t k = 0; k < entries_.size(); ++k)
    if (entries_[k].name == name) return static_cast<MatrixId>(k);
  throw ContractError("BlockStore: no matrix named " + name);
}

bool BlockStore::valid(const BlockId& id) const {
  if (id.matrix >= entries_.size()) return false;
  const auto& a = entries_[id.matrix].matrix;
  return id.i >= 0 && id.j >= 0 && id.i < a.block_rows() && id.j < a.block_cols();
}

std::string BlockStore::describe(const BlockId& id) const {
  const std::string mat =
      id.matrix < entries_.size() ? entries_[id.matrix].name : "#" + std::to_string(id.matrix);
  return "(" + mat + "," + std::to_string(id.i) + "," + std::to_string(id.j) + ")";
}

Block BlockStore::make_block(const BlockId& id) const {
  return matrix(id.matrix).make_block(id.i, id.j);
}

void BlockStore::delay() const {
  if (io_delay_.count() > 0) std::this_thread::sleep_for(io_delay_);
}

Block BlockStore::read_block(const BlockId& id) {
  Block out = make_block(id);
  read_block(id, out);
  return out;
}

void BlockStore::read_block(const BlockId& id, Block& out) {
  const auto& a = matrix(id.matrix);
  const auto t0 = recorder_.now_ns();
  a.read_slot(id.i, id.j, out);
  delay();
  recorder_.record(EventKind::read, "Read_block", describe(id), t0, recorder_.now_ns(),
                   a.slot_bytes());
}

void BlockStore::write_block(const BlockId& id, const Block& blk) {
  const auto& a = matrix(id.matrix);
  OOCRR_REQUIRE(blk.rows() == a.block_logical_rows(id.i) && blk.cols() == a.block_logical_cols(id.j),
                "write_block: logical shape does not match slot " + describe(id));
  const auto t0 = recorder_.now_ns();
  a.write_slot(id.i, id.j, blk);
  delay();
  recorder_.record(EventKind::write, "Write_block", describe(id), t0, recorder_.now_ns(),
                   a.slot_bytes());
}

OocMatrix import_dense(const Eigen::Ref<const Matrix<double>>& a, const fs::path& path, Index b) {
  return generate_blocks(path, a.rows(), a.cols(), b, [&](Index i, Index j, Block& blk) {
    blk.logical() = a.block(i * b, j * b, blk.rows(), blk.cols());
  });
}

Matrix<double> export_dense(const OocMatrix& a) {
  Matrix<double> out(a.rows(), a.cols());
  const Index b = a.block_size();
  for (Index j = 0; j < a.block_cols(); ++j) {
    for (Index i = 0; i < a.block_rows(); ++i) {
      Block blk = a.make_block(i, j);
      a.read_slot(i, j, blk);
      out.block(i * b, j * b, blk.rows(), blk.cols()) = blk.logical();
    }
  }
  return out;
}

OocMatrix import_raw(const fs::path& raw, Index m, Index n, const fs::path& path, Index b) {
  OOCRR_REQUIRE(m >= 1 && n >= 1, "import_raw: empty matrix");
  std::error_code ec;
  const auto size = fs::file_size(raw, ec);
  if (ec) throw IoError(raw.string() + ": " + ec.message());
  if (size != static_cast<std::uint64_t>(m * n) * 8)
    throw ContractError(raw.string() + ": expected " + std::to_string(m * n) +
                        " binary64 values, file holds " + std::to_string(size) + " bytes");
  std::ifstream in(raw, std::ios::binary);
  if (!in) throw IoError(raw.string() + ": cannot open");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(m, n);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError(raw.string() + ": short read");
  return import_dense(rm, path, b);
}

void export_raw(const OocMatrix& a, const fs::path& raw) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = export_dense(a);
  std::ofstream out(raw, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(raw.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!out) throw IoError(raw.string() + ": short write");
}

OocMatrix generate_blocks(const fs::path& path, Index m, Index n, Index b,
                          const std::function<void(Index, Index, Block&)>& fill) {
  OocMatrix a = OocMatrix::create(path, m, n, b);
  for (Index j = 0; j < a.block_cols(); ++j) {
    for (Index i = 0; i < a.block_rows(); ++i) {
      Block blk = a.make_block(i, j);
      fill(i, j, blk);
      blk.zero_padding();
      a.write_slot(i, j, blk);
    }
  }
  return a;
}

OocMatrix copy_matrix(const OocMatrix& src, const fs::path& dst) {
  std::error_code ec;
  fs::copy_file(src.path(), dst, fs::copy_options::overwrite_existing, ec);
  if (ec) throw IoError(dst.string() + ": " + ec.message());
  return OocMatrix::open(dst);
}

OocMatrix reblock(const OocMatrix& src, const fs::path& dst, Index b) {
  OOCRR_REQUIRE(b >= 1, "reblock: block size must be positive");
  const Index sb = src.block_size();
  Block in = src.make_block(0, 0);
  return generate_blocks(dst, src.rows(), src.cols(), b, [&](Index i, Index j, Block& out) {
    const Index r0 = i * b, c0 = j * b;
    for (Index sj = c0 / sb; sj * sb < c0 + out.cols(); ++sj)
      for (Index si = r0 / sb; si * sb < r0 + out.rows(); ++si) {
        in = src.make_block(si, sj);
        src.read_slot(si, sj, in);
        // Overlap of source tile (si, sj) with target tile (i, j) in global indices.
        const Index gr0 = std::max(r0, si * sb), gr1 = std::min(r0 + out.rows(), si * sb + in.rows());
        const Index gc0 = std::max(c0, sj * sb), gc1 = std::min(c0 + out.cols(), sj * sb + in.cols());
        out.padded().block(gr0 - r0, gc0 - c0, gr1 - gr0, gc1 - gc0) =
            in.padded().block(gr0 - si * sb, gc0 - sj * sb, gr1 - gr0, gc1 - gc0);
      }
  });
}

}  // namespace oocrr
