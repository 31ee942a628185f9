#include "oocrr/runtime.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "runtime_detail.hpp"

namespace oocrr {

namespace detail {

void rethrow_for_task(std::size_t t, const Task& task) {
  const std::string prefix = "task " + std::to_string(t) + " (" + to_string(task.kind) + "): ";
  try {
    throw;
  } catch (const SvdConvergenceError& e) {
    throw SvdConvergenceError(e.sweeps(), prefix + "diagonal block " +
                                              std::to_string(task.inputs.at(0).i));
  } catch (const ContractError& e) {
    throw ContractError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  }
}

UsePlan::UsePlan(const TaskList& list) : list_(list) {
  for (std::size_t t = 0; t < list.size(); ++t)
    for (const auto& id : list[t].operands()) uses_[id].push_back(t);
}

bool UsePlan::read_from(const BlockId& id, std::size_t t) const {
  const auto it = uses_.find(id);
  if (it == uses_.end()) return false;
  const auto& pos = it->second;
  const auto next = std::lower_bound(pos.begin(), pos.end(), t);
  return next != pos.end() && list_[*next].reads(id);
}

void record_compute(BlockStore& store, const Task& task, std::int64_t t0, std::int64_t t1) {
  store.recorder().record(EventKind::compute, to_string(task.kind),
                          store.describe(task.outputs.front()), t0, t1, 0);
}

}  // namespace detail

Dispatcher parse_dispatcher(const std::string& name) {
  if (name == "trad" || name == "traditional") return Dispatcher::traditional;
  if (name == "cache" || name == "cached") return Dispatcher::cached;
  if (name == "overlap") return Dispatcher::overlap;
  throw ContractError("unknown dispatcher '" + name + "' (expected trad, cache or overlap)");
}

const char* to_string(Dispatcher d) {
  switch (d) {
    case Dispatcher::traditional: return "trad";
    case Dispatcher::cached: return "cache";
    case Dispatcher::overlap: return "overlap";
  }
  return "?";
}

IoStats run_traditional(BlockStore& store, const TaskList& list) {
  OOCRR_REQUIRE(&list.store() == &store, "run_traditional: task list belongs to another store");
  auto& rec = store.recorder();
  rec.reset();
  for (std::size_t t = 0; t < list.size(); ++t) {
    const Task& task = list[t];
    const auto ops = task.operands();
    std::vector<Block> blocks;
    blocks.reserve(ops.size());
    std::vector<Block*> ptrs;
    try {
      for (const auto& id : ops)
        blocks.push_back(task.reads(id) ? store.read_block(id) : store.make_block(id));
      for (auto& b : blocks) ptrs.push_back(&b);
      const auto t0 = rec.now_ns();
      execute_task(task, ptrs);
      detail::record_compute(store, task, t0, rec.now_ns());
      for (const auto& id : task.outputs) {
        const auto k = static_cast<std::size_t>(std::find(ops.begin(), ops.end(), id) - ops.begin());
        store.write_block(id, blocks[k]);
      }
    } catch (...) {
      detail::rethrow_for_task(t, task);
    }
  }
  return rec.snapshot();
}

LruCache::LruCache(BlockStore& store, std::size_t capacity) : store_(store), capacity_(capacity) {
  OOCRR_REQUIRE(capacity >= 1, "cache capacity must be at least one block");
}

void LruCache::evict_one() {
  auto victim = entries_.end();
  for (auto it = entries_.begin(); it != entries_.end(); ++it)
    if (!it->second.pinned && (victim == entries_.end() || it->second.last_use < victim->second.last_use))
      victim = it;
  OOCRR_REQUIRE(victim != entries_.end(), "cache capacity too small for a single task");
  if (victim->second.dirty && (!filter_ || filter_(victim->first)))
    store_.write_block(victim->first, victim->second.payload);
  entries_.erase(victim);
}

Block& LruCache::acquire(const BlockId& id, bool needs_read) {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    if (entries_.size() >= capacity_) evict_one();
    Entry e;
    e.payload = needs_read ? store_.read_block(id) : store_.make_block(id);
    it = entries_.emplace(id, std::move(e)).first;
  }
  it->second.last_use = ++clock_;
  it->second.pinned = true;
  return it->second.payload;
}

void LruCache::mark_dirty(const BlockId& id) {
  const auto it = entries_.find(id);
  OOCRR_REQUIRE(it != entries_.end(), "mark_dirty: block not resident");
  it->second.dirty = true;
}

void LruCache::unpin_all() {
  for (auto& [id, e] : entries_) e.pinned = false;
}

void LruCache::flush(const WritebackFilter& filter) {
  // Deterministic order keeps the write sequence reproducible.
  std::vector<BlockId> dirty;
  for (const auto& [id, e] : entries_)
    if (e.dirty) dirty.push_back(id);
  std::sort(dirty.begin(), dirty.end());
  for (const auto& id : dirty) {
    auto& e = entries_.at(id);
    if (!filter || filter(id)) store_.write_block(id, e.payload);
    e.dirty = false;
  }
}

IoStats run_cached(BlockStore& store, const TaskList& list, std::size_t capacity) {
  OOCRR_REQUIRE(&list.store() == &store, "run_cached: task list belongs to another store");
  OOCRR_REQUIRE(capacity >= list.max_operands(),
                "run_cached: capacity " + std::to_string(capacity) + " is below the " +
                    std::to_string(list.max_operands()) + " operands of a single task");
  auto& rec = store.recorder();
  rec.reset();
  const detail::UsePlan plan(list);
  LruCache cache(store, capacity);
  std::size_t current = 0;
  cache.set_writeback_filter([&](const BlockId& id) {
    return !store.scratch(id.matrix) || plan.read_from(id, current);
  });

  for (; current < list.size(); ++current) {
    const Task& task = list[current];
    try {
      const auto ops = task.operands();
      std::vector<Block*> ptrs;
      for (const auto& id : ops) ptrs.push_back(&cache.acquire(id, task.reads(id)));
      const auto t0 = rec.now_ns();
      execute_task(task, ptrs);
      detail::record_compute(store, task, t0, rec.now_ns());
      for (const auto& id : task.outputs) cache.mark_dirty(id);
      cache.unpin_all();
    } catch (...) {
      detail::rethrow_for_task(current, task);
    }
  }
  cache.flush([&](const BlockId& id) { return !store.scratch(id.matrix); });
  return rec.snapshot();
}

IoStats dispatch(BlockStore& store, const TaskList& list, Dispatcher d, std::size_t capacity) {
  switch (d) {
    case Dispatcher::traditional: return run_traditional(store, list);
    case Dispatcher::cached: return run_cached(store, list, capacity);
    case Dispatcher::overlap: return run_overlap(store, list, capacity);
  }
  throw ContractError("unknown dispatcher");
}

namespace {

class DirectAccess final : public BlockAccess {
 public:
  explicit DirectAccess(BlockStore& store) : store_(store) {}
  Block load(const BlockId& id) override { return store_.read_block(id); }
  void store(const BlockId& id, const Block& blk) override { store_.write_block(id, blk); }

 private:
  BlockStore& store_;
};

class CachedAccess final : public BlockAccess {
 public:
  CachedAccess(BlockStore& store, std::size_t capacity) : cache_(store, capacity) {}
  Block load(const BlockId& id) override {
    Block out = cache_.acquire(id, true);
    cache_.unpin_all();
    return out;
  }
  void store(const BlockId& id, const Block& blk) override {
    cache_.acquire(id, false) = blk;
    cache_.mark_dirty(id);
    cache_.unpin_all();
  }
  void flush() override { cache_.flush(nullptr); }

 private:
  LruCache cache_;
};

}  // namespace

std::unique_ptr<BlockAccess> make_access(BlockStore& store, Dispatcher d, std::size_t capacity) {
  if (d == Dispatcher::traditional) return std::make_unique<DirectAccess>(store);
  return std::make_unique<CachedAccess>(store, capacity);
}

void write_trace_jsonl(const IoStats& stats, std::ostream& out) {
  for (const auto& e : stats.events) {
    nlohmann::json j;
    j["kind"] = to_string(e.kind);
    j["label"] = e.label;
    j["t_start_ns"] = e.t_start_ns;
    j["t_end_ns"] = e.t_end_ns;
    j["block"] = e.block;
    out << j.dump() << '\n';
  }
}

std::vector<TraceEvent> read_trace_jsonl(std::istream& in) {
  std::vector<TraceEvent> events;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceEvent e;
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "read")
        e.kind = EventKind::read;
      else if (kind == "write")
        e.kind = EventKind::write;
      else if (kind == "compute")
        e.kind = EventKind::compute;
      else
        throw ContractError("unknown event kind '" + kind + "'");
      e.label = j.at("label").get<std::string>();
      e.t_start_ns = j.at("t_start_ns").get<std::int64_t>();
      e.t_end_ns = j.at("t_end_ns").get<std::int64_t>();
      e.block = j.value("block", std::string());
      if (e.t_end_ns < e.t_start_ns) throw ContractError("event ends before it starts");
      events.push_back(std::move(e));
    } catch (const std::exception& e) {
      throw ContractError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return events;
}

}  // namespace oocrr
