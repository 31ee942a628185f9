#pragma once

#include <unordered_map>
#include <vector>

#include "oocrr/runtime.hpp"

namespace oocrr::detail {

/// Rethrows the in-flight exception with "task t (<kind>): " prepended,
/// keeping its type so callers can still map it to an exit code.
[[noreturn]] void rethrow_for_task(std::size_t t, const Task& task);

/// Positions at which every block is touched, for write-back decisions.
class UsePlan {
 public:
  explicit UsePlan(const TaskList& list);

  /// True when the first task at or after position `t` that touches `id`
  /// reads it, i.e. the current contents are still needed.
  bool read_from(const BlockId& id, std::size_t t) const;

 private:
  const TaskList& list_;
  std::unordered_map<BlockId, std::vector<std::size_t>, BlockIdHash> uses_;
};

void record_compute(BlockStore& store, const Task& task, std::int64_t t0, std::int64_t t1);

}  // namespace oocrr::detail
