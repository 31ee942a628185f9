#pragma once

// Executors for a recorded TaskList. All three dispatchers run the kernels in
// list order, so they leave bitwise-identical data on disk; they differ only
// in how blocks move between memory and the files.

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>

#include "oocrr/task.hpp"

namespace oocrr {

enum class Dispatcher : std::uint8_t { traditional, cached, overlap };

/// "trad" | "cache" | "overlap"
Dispatcher parse_dispatcher(const std::string& name);
const char* to_string(Dispatcher d);

/// Reads every input, runs the kernel, writes every output. Output-only
/// operands are never read.
IoStats run_traditional(BlockStore& store, const TaskList& list);

/// LRU block cache of `capacity` blocks with dirty write-back. Dirty blocks of
/// scratch matrices are dropped instead of written once no later task uses them.
IoStats run_cached(BlockStore& store, const TaskList& list, std::size_t capacity);

/// Same cache shared with a dedicated I/O thread that prefetches operands in
/// task order and writes back victims while the calling thread computes.
/// Requires capacity > list.max_operands().
IoStats run_overlap(BlockStore& store, const TaskList& list, std::size_t capacity);

IoStats dispatch(BlockStore& store, const TaskList& list, Dispatcher d, std::size_t capacity);

/// Single-agent LRU pool shared by run_cached and the HQRRP drivers.
class LruCache {
 public:
  /// Decides whether a dirty block leaving the cache must reach the disk.
  using WritebackFilter = std::function<bool(const BlockId&)>;

  LruCache(BlockStore& store, std::size_t capacity);

  /// Makes `id` resident (reading it when `needs_read`, else zero-filling),
  /// marks it most recently used and pins it until unpin_all().
  Block& acquire(const BlockId& id, bool needs_read);
  void mark_dirty(const BlockId& id);
  void unpin_all();
  bool resident(const BlockId& id) const { return entries_.count(id) != 0; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }

  void set_writeback_filter(WritebackFilter f) { filter_ = std::move(f); }
  /// Writes back every remaining dirty block accepted by `filter`.
  void flush(const WritebackFilter& filter);

 private:
  struct Entry {
    Block payload;
    bool dirty = false;
    bool pinned = false;
    std::uint64_t last_use = 0;
  };
  void evict_one();

  BlockStore& store_;
  std::size_t capacity_;
  std::uint64_t clock_ = 0;
  std::unordered_map<BlockId, Entry, BlockIdHash> entries_;
  WritebackFilter filter_;
};

/// Block-granular load/store used by drivers whose access pattern depends on
/// the data (HQRRP pivots) and therefore cannot be recorded ahead of time.
class BlockAccess {
 public:
  virtual ~BlockAccess() = default;
  virtual Block load(const BlockId& id) = 0;
  virtual void store(const BlockId& id, const Block& blk) = 0;
  /// Pushes pending writes to disk.
  virtual void flush() {}
};

/// traditional -> direct transfers; cached and overlap -> LRU cache.
std::unique_ptr<BlockAccess> make_access(BlockStore& store, Dispatcher d, std::size_t capacity);

/// One JSON object per line: {kind, label, t_start_ns, t_end_ns, block}.
void write_trace_jsonl(const IoStats& stats, std::ostream& out);
/// Throws ContractError naming the offending line.
std::vector<TraceEvent> read_trace_jsonl(std::istream& in);

}  // namespace oocrr
