#include "oocrr/task.hpp"

#include <algorithm>

#include "oocrr/kernels.hpp"

namespace oocrr {

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::generate_normal_random: return "Generate_normal_random";
    case TaskKind::gemm_tn_oz: return "Gemm_tn_oz";
    case TaskKind::gemm_tn_oo: return "Gemm_tn_oo";
    case TaskKind::gemm_nn_oz: return "Gemm_nn_oz";
    case TaskKind::gemm_nn_oo: return "Gemm_nn_oo";
    case TaskKind::gemm_abta: return "Gemm_abta";
    case TaskKind::gemm_aabt: return "Gemm_aabt";
    case TaskKind::comp_dense_qr: return "Comp_dense_QR";
    case TaskKind::comp_td_qr: return "Comp_td_QR";
    case TaskKind::apply_right_q_of_dense_qr: return "Apply_right_Q_of_dense_QR";
    case TaskKind::apply_right_q_td_qr: return "Apply_right_Q_td_QR";
    case TaskKind::apply_left_qt_of_dense_qr: return "Apply_left_Qt_of_dense_QR";
    case TaskKind::apply_left_qt_of_td_qr: return "Apply_left_Qt_of_td_QR";
    case TaskKind::keep_upper_triang: return "Keep_upper_triang";
    case TaskKind::set_to_zero: return "Set_to_zero";
    case TaskKind::svd_of_block: return "Svd_of_block";
  }
  return "?";
}

std::vector<BlockId> Task::operands() const {
  std::vector<BlockId> ids;
  ids.reserve(inputs.size() + outputs.size());
  for (const auto* list : {&inputs, &outputs})
    for (const auto& id : *list)
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  return ids;
}

bool Task::reads(const BlockId& id) const {
  return std::find(inputs.begin(), inputs.end(), id) != inputs.end();
}

namespace {

struct Shape {
  std::size_t ins, outs;
  // (input, output) index pairs that must name the same block
  std::vector<std::pair<std::size_t, std::size_t>> aliases;
};

Shape shape_of(TaskKind kind) {
  switch (kind) {
    case TaskKind::generate_normal_random: return {0, 1, {}};
    case TaskKind::gemm_tn_oz:
    case TaskKind::gemm_nn_oz: return {2, 1, {}};
    case TaskKind::gemm_tn_oo:
    case TaskKind::gemm_nn_oo: return {3, 1, {{2, 0}}};
    case TaskKind::gemm_abta: return {2, 1, {{1, 0}}};
    case TaskKind::gemm_aabt: return {2, 1, {{0, 0}}};
    case TaskKind::comp_dense_qr: return {1, 2, {{0, 0}}};
    case TaskKind::comp_td_qr: return {2, 3, {{0, 0}, {1, 1}}};
    case TaskKind::apply_right_q_of_dense_qr:
    case TaskKind::apply_left_qt_of_dense_qr: return {3, 1, {{2, 0}}};
    case TaskKind::apply_right_q_td_qr:
    case TaskKind::apply_left_qt_of_td_qr: return {4, 2, {{2, 0}, {3, 1}}};
    case TaskKind::keep_upper_triang: return {1, 1, {{0, 0}}};
    case TaskKind::set_to_zero: return {0, 1, {}};
    case TaskKind::svd_of_block: return {1, 3, {{0, 0}}};
  }
  return {0, 0, {}};
}

}  // namespace

void TaskList::push(Task task) {
  const Shape sh = shape_of(task.kind);
  const std::string kind = to_string(task.kind);
  OOCRR_REQUIRE(task.inputs.size() == sh.ins && task.outputs.size() == sh.outs,
                kind + ": wrong operand count");
  for (const auto& [in, out] : sh.aliases)
    OOCRR_REQUIRE(task.inputs[in] == task.outputs[out],
                  kind + ": in-place operand must appear in both lists");
  for (const auto* list : {&task.inputs, &task.outputs})
    for (const auto& id : *list)
      OOCRR_REQUIRE(store_->valid(id), kind + ": invalid block id " + store_->describe(id));
  // Distinct outputs keep the dispatch of every kernel well defined.
  for (std::size_t a = 0; a < task.outputs.size(); ++a)
    for (std::size_t b = a + 1; b < task.outputs.size(); ++b)
      OOCRR_REQUIRE(!(task.outputs[a] == task.outputs[b]), kind + ": repeated output block");
  OOCRR_REQUIRE(task.kind != TaskKind::generate_normal_random || task.seed.has_value(),
                kind + ": missing seed");
  tasks_.push_back(std::move(task));
}

TaskList TaskList::prefix(std::size_t count) const {
  TaskList out(*store_);
  out.tasks_.assign(tasks_.begin(), tasks_.begin() + std::min(count, tasks_.size()));
  return out;
}

std::size_t TaskList::max_operands() const {
  std::size_t m = 0;
  for (const auto& t : tasks_) m = std::max(m, t.operands().size());
  return m;
}

void push_task(TaskList& list, Task task) { list.push(std::move(task)); }

void execute_task(const Task& task, const std::vector<Block*>& blocks) {
  const auto ops = task.operands();
  OOCRR_REQUIRE(blocks.size() == ops.size(), "execute_task: operand count mismatch");
  auto at = [&](const BlockId& id) -> Block& {
    const auto k = static_cast<std::size_t>(std::find(ops.begin(), ops.end(), id) - ops.begin());
    return *blocks[k];
  };
  auto in = [&](std::size_t k) -> Block& { return at(task.inputs[k]); };
  auto out = [&](std::size_t k) -> Block& { return at(task.outputs[k]); };

  switch (task.kind) {
    case TaskKind::generate_normal_random:
      generate_normal_random(*task.seed, out(0));
      break;
    case TaskKind::gemm_tn_oz: gemm(GemmMode::tn_oz, in(0), in(1), out(0)); break;
    case TaskKind::gemm_tn_oo: gemm(GemmMode::tn_oo, in(0), in(1), out(0)); break;
    case TaskKind::gemm_nn_oz: gemm(GemmMode::nn_oz, in(0), in(1), out(0)); break;
    case TaskKind::gemm_nn_oo: gemm(GemmMode::nn_oo, in(0), in(1), out(0)); break;
    case TaskKind::gemm_abta: gemm(GemmMode::abta, in(1), in(0), out(0)); break;
    case TaskKind::gemm_aabt: gemm(GemmMode::aabt, in(0), in(1), out(0)); break;
    case TaskKind::comp_dense_qr: comp_dense_qr(out(0), out(1)); break;
    case TaskKind::comp_td_qr: comp_td_qr(out(0), out(1), out(2)); break;
    case TaskKind::apply_right_q_of_dense_qr:
      apply_right_q(ReflectorPanel<double>{&in(0), &in(1), PanelKind::dense}, out(0));
      break;
    case TaskKind::apply_right_q_td_qr:
      apply_right_q(ReflectorPanel<double>{&in(0), &in(1), PanelKind::td}, out(0), out(1));
      break;
    case TaskKind::apply_left_qt_of_dense_qr:
      apply_left_qt(ReflectorPanel<double>{&in(0), &in(1), PanelKind::dense}, out(0));
      break;
    case TaskKind::apply_left_qt_of_td_qr:
      apply_left_qt(ReflectorPanel<double>{&in(0), &in(1), PanelKind::td}, out(0), out(1));
      break;
    case TaskKind::keep_upper_triang: keep_upper_triang(out(0)); break;
    case TaskKind::set_to_zero: set_to_zero(out(0)); break;
    case TaskKind::svd_of_block: svd_block(out(0), out(1), out(2)); break;
  }
}

std::string describe(const BlockStore& store, const Task& task) {
  std::string s = to_string(task.kind);
  for (std::size_t k = 0; k < task.outputs.size(); ++k)
    s += (k == 0 ? " " : ",") + store.describe(task.outputs[k]);
  s += " <-";
  for (const auto& id : task.inputs) s += " " + store.describe(id);
  return s;
}

}  // namespace oocrr
