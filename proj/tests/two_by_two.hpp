#pragma once

// The 2 x 2 block randUTV setup (q = 0, no U/V) whose task list, traditional
// dispatch and 7-block cache dispatch have known, hand-countable I/O.

#include <optional>
#include <string>
#include <vector>

#include "oocrr/randutv.hpp"
#include "test_util.hpp"

namespace testutil {

struct TaskRow {
  std::string kind;
  std::vector<std::string> in;
  std::vector<std::string> out;
  bool operator==(const TaskRow&) const = default;
};

inline const std::vector<TaskRow>& two_by_two_rows() {
  static const std::vector<TaskRow> rows = {
      {"Generate_normal_random", {}, {"G0"}},
      {"Generate_normal_random", {}, {"G1"}},
      {"Gemm_tn_oz", {"A00", "G0"}, {"Y0"}},
      {"Gemm_tn_oz", {"A01", "G0"}, {"Y1"}},
      {"Gemm_tn_oo", {"A10", "G1", "Y0"}, {"Y0"}},
      {"Gemm_tn_oo", {"A11", "G1", "Y1"}, {"Y1"}},
      {"Comp_dense_QR", {"Y0"}, {"Y0", "B0"}},
      {"Comp_td_QR", {"Y0", "Y1"}, {"Y0", "Y1", "B1"}},
      {"Apply_right_Q_of_dense_QR", {"Y0", "B0", "A00"}, {"A00"}},
      {"Apply_right_Q_of_dense_QR", {"Y0", "B0", "A10"}, {"A10"}},
      {"Apply_right_Q_td_QR", {"Y1", "B1", "A00", "A01"}, {"A00", "A01"}},
      {"Apply_right_Q_td_QR", {"Y1", "B1", "A10", "A11"}, {"A10", "A11"}},
      {"Comp_dense_QR", {"A00"}, {"A00", "C0"}},
      {"Comp_td_QR", {"A00", "A10"}, {"A00", "A10", "C1"}},
      {"Apply_left_Qt_of_dense_QR", {"A00", "C0", "A01"}, {"A01"}},
      {"Apply_left_Qt_of_td_QR", {"A10", "C1", "A01", "A11"}, {"A01", "A11"}},
      {"Keep_upper_triang", {"A00"}, {"A00"}},
      {"Set_to_zero", {}, {"A10"}},
      {"Svd_of_block", {"A00"}, {"A00", "P0", "Q0"}},
      {"Gemm_abta", {"P0", "A01"}, {"A01"}},
      {"Svd_of_block", {"A11"}, {"A11", "P0", "Q0"}},
      {"Gemm_aabt", {"A01", "Q0"}, {"A01"}},
  };
  return rows;
}

/// "A01" for a 2-D block grid, "G1" for a single block column.
inline std::string short_name(const oocrr::BlockStore& store, const oocrr::BlockId& id) {
  const auto& m = store.matrix(id.matrix);
  std::string s = store.name(id.matrix) + std::to_string(id.i);
  if (m.block_cols() > 1) s += std::to_string(id.j);
  return s;
}

inline TaskRow row_of(const oocrr::BlockStore& store, const oocrr::Task& t) {
  TaskRow r{oocrr::to_string(t.kind), {}, {}};
  for (const auto& id : t.inputs) r.in.push_back(short_name(store, id));
  for (const auto& id : t.outputs) r.out.push_back(short_name(store, id));
  return r;
}

/// Store and randUTV task list for a random m x n matrix, built by hand so
/// tests can see the list the driver would dispatch.
class UtvPlanSetup {
 public:
  UtvPlanSetup(oocrr::Index m, oocrr::Index n, oocrr::Index b, int q, bool uv,
               std::uint64_t seed = 1) {
    using namespace oocrr;
    layout.block_rows = (m + b - 1) / b;
    layout.block_cols = (n + b - 1) / b;
    layout.t = store.add("A", import_dense(random_matrix(m, n, seed), dir / "A.oocb", b));
    layout.g = store.add("G", OocMatrix::create(dir / "G", m, b, b), true);
    layout.y = store.add("Y", OocMatrix::create(dir / "Y", n, b, b), true);
    if (q > 0) layout.z = store.add("Z", OocMatrix::create(dir / "Z", m, b, b), true);
    layout.b = store.add("B", OocMatrix::create(dir / "B", layout.block_cols * b, b, b), true);
    layout.c = store.add("C", OocMatrix::create(dir / "C", layout.block_rows * b, b, b), true);
    layout.p = store.add("P", OocMatrix::create(dir / "P", b, b, b), true);
    layout.q = store.add("Q", OocMatrix::create(dir / "Q", b, b, b), true);
    if (uv) {
      layout.u = store.add("U", OocMatrix::create(dir / "U", m, m, b));
      layout.v = store.add("V", OocMatrix::create(dir / "V", n, n, b));
    }
    list.emplace(plan_randutv(store, layout, q, seed));
  }

  TempDir dir;
  oocrr::BlockStore store;
  oocrr::UtvLayout layout;
  std::optional<oocrr::TaskList> list;
};

class TwoByTwoSetup : public UtvPlanSetup {
 public:
  explicit TwoByTwoSetup(oocrr::Index b = 8, std::uint64_t seed = 1)
      : UtvPlanSetup(2 * b, 2 * b, b, 0, false, seed) {}
};

}  // namespace testutil
