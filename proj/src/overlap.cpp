#include <algorithm>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "oocrr/runtime.hpp"
#include "runtime_detail.hpp"

namespace oocrr {

namespace {

enum class State : std::uint8_t { loading, resident, writing };

struct Entry {
  Block payload;
  State state = State::loading;
  bool dirty = false;
  bool pinned = false;
  std::uint64_t last_use = 0;
};

// Cache shared by the compute thread (the caller) and one I/O thread. All
// fields are guarded by `mutex`; payloads of pinned entries belong to the
// compute thread and payloads in loading/writing state to the I/O thread, so
// neither side holds the lock while moving data.
class OverlapRun {
 public:
  OverlapRun(BlockStore& store, const TaskList& list, std::size_t capacity)
      : store_(store), list_(list), plan_(list), capacity_(capacity) {}

  void compute() {
    std::thread io([this] { io_loop(); });
    std::size_t t = 0;
    try {
      for (; t < list_.size(); ++t) run_task(t);
    } catch (...) {
      {
        std::lock_guard lock(mutex_);
        abort_ = true;
      }
      cv_.notify_all();
      io.join();
      if (io_error_) std::rethrow_exception(io_error_);
      detail::rethrow_for_task(t, list_[t]);
    }
    {
      std::lock_guard lock(mutex_);
      compute_done_ = true;
    }
    cv_.notify_all();
    io.join();
    if (io_error_) std::rethrow_exception(io_error_);
  }

 private:
  struct Want {
    BlockId id;
    bool needs_read = false;
  };

  void run_task(std::size_t t) {
    const Task& task = list_[t];
    const auto ops = task.operands();
    std::vector<Block*> ptrs;
    {
      std::unique_lock lock(mutex_);
      current_ = t;
      cv_.notify_all();
      cv_.wait(lock, [&] {
        if (io_error_) return true;
        return std::all_of(ops.begin(), ops.end(), [&](const BlockId& id) {
          const auto it = entries_.find(id);
          return it != entries_.end() && it->second.state == State::resident;
        });
      });
      if (io_error_) throw IoError("I/O agent failed");
      for (const auto& id : ops) {
        auto& e = entries_.at(id);
        e.pinned = true;
        e.last_use = ++clock_;
        ptrs.push_back(&e.payload);
      }
    }
    auto& rec = store_.recorder();
    const auto t0 = rec.now_ns();
    execute_task(task, ptrs);
    detail::record_compute(store_, task, t0, rec.now_ns());
    {
      std::lock_guard lock(mutex_);
      for (const auto& id : task.outputs) entries_.at(id).dirty = true;
      for (const auto& id : ops) entries_.at(id).pinned = false;
      current_ = t + 1;
    }
    cv_.notify_all();
  }

  // Distinct operands of tasks current_, current_+1, ... up to capacity - 1
  // blocks. Each comes with whether its next use reads it.
  std::vector<Want> window(std::unordered_set<BlockId, BlockIdHash>& members) const {
    std::vector<Want> out;
    const std::size_t limit = capacity_ - 1;
    for (std::size_t t = current_; t < list_.size() && out.size() < limit; ++t) {
      const Task& task = list_[t];
      for (const auto& id : task.operands()) {
        if (out.size() >= limit) break;
        if (members.insert(id).second) out.push_back({id, task.reads(id)});
      }
    }
    return out;
  }

  void io_loop() {
    try {
      std::unique_lock lock(mutex_);
      while (!abort_) {
        if (compute_done_) {
          lock.unlock();
          final_flush();
          return;
        }
        std::unordered_set<BlockId, BlockIdHash> members;
        const auto want = window(members);
        const auto missing = std::find_if(want.begin(), want.end(), [&](const Want& w) {
          return entries_.count(w.id) == 0;
        });
        if (missing == want.end()) {
          if (!clean(lock, members)) cv_.wait(lock);
          continue;
        }
        if (entries_.size() >= capacity_) {
          if (!evict(lock, members)) cv_.wait(lock);
          continue;
        }
        const Want w = *missing;
        auto& e = entries_[w.id];
        if (!w.needs_read) {
          e.payload = store_.make_block(w.id);
          e.state = State::resident;
          cv_.notify_all();
          continue;
        }
        e.state = State::loading;
        e.payload = store_.make_block(w.id);
        lock.unlock();
        store_.read_block(w.id, e.payload);
        lock.lock();
        e.state = State::resident;
        cv_.notify_all();
      }
    } catch (...) {
      std::lock_guard lock(mutex_);
      io_error_ = std::current_exception();
      cv_.notify_all();
    }
  }

  // Removes the least recently used entry outside the window; false when
  // every candidate is still in use.
  bool evict(std::unique_lock<std::mutex>& lock,
             const std::unordered_set<BlockId, BlockIdHash>& members) {
    auto victim = entries_.end();
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      const auto& e = it->second;
      if (e.pinned || e.state != State::resident || members.count(it->first)) continue;
      if (victim == entries_.end() || e.last_use < victim->second.last_use) victim = it;
    }
    if (victim == entries_.end()) return false;
    const BlockId id = victim->first;
    auto& e = victim->second;
    const bool keep = !store_.scratch(id.matrix) || plan_.read_from(id, current_);
    if (e.dirty && keep) {
      e.state = State::writing;
      lock.unlock();
      store_.write_block(id, e.payload);
      lock.lock();
    }
    entries_.erase(id);
    cv_.notify_all();
    return true;
  }

  // Write-behind while there is nothing to prefetch: the least recently used
  // dirty block outside the window is written back and kept resident, so its
  // eviction later costs no transfer. False when there is no such block.
  bool clean(std::unique_lock<std::mutex>& lock,
             const std::unordered_set<BlockId, BlockIdHash>& members) {
    auto pick = entries_.end();
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      const auto& e = it->second;
      if (!e.dirty || e.pinned || e.state != State::resident || members.count(it->first)) continue;
      if (store_.scratch(it->first.matrix) && !plan_.read_from(it->first, current_)) continue;
      if (pick == entries_.end() || e.last_use < pick->second.last_use) pick = it;
    }
    if (pick == entries_.end()) return false;
    const BlockId id = pick->first;
    auto& e = pick->second;
    e.state = State::writing;
    lock.unlock();
    store_.write_block(id, e.payload);
    lock.lock();
    e.state = State::resident;
    e.dirty = false;
    cv_.notify_all();
    return true;
  }

  void final_flush() {
    std::vector<BlockId> dirty;
    for (const auto& [id, e] : entries_)
      if (e.dirty && !store_.scratch(id.matrix)) dirty.push_back(id);
    std::sort(dirty.begin(), dirty.end());
    for (const auto& id : dirty) store_.write_block(id, entries_.at(id).payload);
  }

  BlockStore& store_;
  const TaskList& list_;
  detail::UsePlan plan_;
  std::size_t capacity_;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::unordered_map<BlockId, Entry, BlockIdHash> entries_;
  std::size_t current_ = 0;
  std::uint64_t clock_ = 0;
  bool compute_done_ = false;
  bool abort_ = false;
  std::exception_ptr io_error_;
};

}  // namespace

IoStats run_overlap(BlockStore& store, const TaskList& list, std::size_t capacity) {
  OOCRR_REQUIRE(&list.store() == &store, "run_overlap: task list belongs to another store");
  OOCRR_REQUIRE(capacity > list.max_operands(),
                "run_overlap: capacity " + std::to_string(capacity) +
                    " must exceed the largest operand set (" +
                    std::to_string(list.max_operands()) + ") to leave room for prefetching");
  store.recorder().reset();
  OverlapRun(store, list, capacity).compute();
  return store.recorder().snapshot();
}

}  // namespace oocrr
