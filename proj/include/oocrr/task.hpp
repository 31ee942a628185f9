#pragma once

#include <optional>
#include <string>
#include <vector>

#include "oocrr/block_store.hpp"

namespace oocrr {

enum class TaskKind : std::uint8_t {
  generate_normal_random,
  gemm_tn_oz,
  gemm_tn_oo,
  gemm_nn_oz,
  gemm_nn_oo,
  gemm_abta,
  gemm_aabt,
  comp_dense_qr,
  comp_td_qr,
  apply_right_q_of_dense_qr,
  apply_right_q_td_qr,
  apply_left_qt_of_dense_qr,
  apply_left_qt_of_td_qr,
  keep_upper_triang,
  set_to_zero,
  svd_of_block,
};

/// Printable name, e.g. "Apply_right_Q_td_QR".
const char* to_string(TaskKind kind);

/// Operand conventions (inputs -> outputs):
///   Generate_normal_random      -            -> G
///   Gemm_tn_oz / Gemm_nn_oz     A, B         -> C
///   Gemm_tn_oo / Gemm_nn_oo     A, B, C      -> C
///   Gemm_abta                   B, A         -> A      A := B^T A
///   Gemm_aabt                   A, B         -> A      A := A B^T
///   Comp_dense_QR               A            -> A, S
///   Comp_td_QR                  Top, Bot     -> Top, Bot, S
///   Apply_*_dense_QR            W, S, C      -> C
///   Apply_*_td_QR               W, S, C1, C2 -> C1, C2
///   Keep_upper_triang           A            -> A
///   Set_to_zero                 -            -> A
///   Svd_of_block                A            -> A, P, Q   A = P D Q
struct Task {
  TaskKind kind = TaskKind::set_to_zero;
  std::vector<BlockId> inputs;
  std::vector<BlockId> outputs;
  std::optional<GaussianSeed> seed;

  /// Inputs first, then outputs, duplicates removed.
  std::vector<BlockId> operands() const;
  bool reads(const BlockId& id) const;
};

class TaskList {
 public:
  explicit TaskList(const BlockStore& store) : store_(&store) {}

  /// Appends after checking arity, aliasing and block ids.
  void push(Task task);

  const BlockStore& store() const noexcept { return *store_; }
  std::size_t size() const noexcept { return tasks_.size(); }
  bool empty() const noexcept { return tasks_.empty(); }
  const Task& operator[](std::size_t t) const { return tasks_[t]; }
  auto begin() const noexcept { return tasks_.begin(); }
  auto end() const noexcept { return tasks_.end(); }

  /// Copy holding only tasks [0, count).
  TaskList prefix(std::size_t count) const;
  /// Largest number of distinct operands of a single task.
  std::size_t max_operands() const;

 private:
  const BlockStore* store_;
  std::vector<Task> tasks_;
};

void push_task(TaskList& list, Task task);

/// Runs the kernel of `task` on resident operands. `blocks[k]` backs the k-th
/// entry of task.operands().
void execute_task(const Task& task, const std::vector<Block*>& blocks);

/// "Gemm_tn_oo (Y,0,0) <- (A,1,0) (G,1,0) (Y,0,0)"
std::string describe(const BlockStore& store, const Task& task);

}  // namespace oocrr
