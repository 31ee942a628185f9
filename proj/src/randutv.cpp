#include "oocrr/randutv.hpp"

namespace oocrr {

namespace {

class Planner {
 public:
  Planner(const BlockStore& store, const UtvLayout& l, int q, std::uint64_t seed)
      : list_(store), l_(l), q_(q), seed_(seed), M_(l.block_rows), N_(l.block_cols) {}

  TaskList run() {
    for (Index k = 0; k < N_; ++k) {
      if (k < N_ - 1) {
        sketch(k);
        factor_sample(k);
        right_transform(k);
      }
      if (k < M_ - 1) {
        left_transform(k);
        emit(TaskKind::keep_upper_triang, {t(k, k)}, {t(k, k)});
        for (Index p = k + 1; p < M_; ++p) emit(TaskKind::set_to_zero, {}, {t(p, k)});
      }
      small_svd(k);
    }
    return std::move(list_);
  }

 private:
  BlockId t(Index i, Index j) const { return {l_.t, i, j}; }
  BlockId col(MatrixId m, Index i) const { return {m, i, 0}; }
  BlockId one(MatrixId m) const { return {m, 0, 0}; }

  void emit(TaskKind kind, std::vector<BlockId> in, std::vector<BlockId> out) {
    list_.push(Task{kind, std::move(in), std::move(out), std::nullopt});
  }

  // Y_j (+)= T_ij^T src_i over the trailing blocks, block row i outermost.
  void sweep_tn(Index k, MatrixId src) {
    for (Index i = k; i < M_; ++i)
      for (Index j = k; j < N_; ++j) {
        if (i == k)
          emit(TaskKind::gemm_tn_oz, {t(i, j), col(src, i)}, {col(l_.y, j)});
        else
          emit(TaskKind::gemm_tn_oo, {t(i, j), col(src, i), col(l_.y, j)}, {col(l_.y, j)});
      }
  }

  // Z_i (+)= T_ij Y_j, block column j outermost.
  void sweep_nn(Index k) {
    const MatrixId z = *l_.z;
    for (Index j = k; j < N_; ++j)
      for (Index i = k; i < M_; ++i) {
        if (j == k)
          emit(TaskKind::gemm_nn_oz, {t(i, j), col(l_.y, j)}, {col(z, i)});
        else
          emit(TaskKind::gemm_nn_oo, {t(i, j), col(l_.y, j), col(z, i)}, {col(z, i)});
      }
  }

  void sketch(Index k) {
    for (Index i = k; i < M_; ++i) {
      Task task{TaskKind::generate_normal_random, {}, {col(l_.g, i)}, std::nullopt};
      task.seed = GaussianSeed{seed_, l_.g, static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(k)};
      list_.push(std::move(task));
    }
    sweep_tn(k, l_.g);
    for (int r = 0; r < q_; ++r) {
      sweep_nn(k);
      sweep_tn(k, *l_.z);
    }
  }

  void factor_sample(Index k) {
    emit(TaskKind::comp_dense_qr, {col(l_.y, k)}, {col(l_.y, k), col(l_.b, k)});
    for (Index j = k + 1; j < N_; ++j)
      emit(TaskKind::comp_td_qr, {col(l_.y, k), col(l_.y, j)},
           {col(l_.y, k), col(l_.y, j), col(l_.b, j)});
  }

  // X := X V_hat for every block row of X; rows above the diagonal block
  // take part too since columns k.. of T are mixed.
  void apply_right(Index k, MatrixId x, Index rows) {
    for (Index i = 0; i < rows; ++i)
      emit(TaskKind::apply_right_q_of_dense_qr, {col(l_.y, k), col(l_.b, k), {x, i, k}}, {{x, i, k}});
    for (Index j = k + 1; j < N_; ++j)
      for (Index i = 0; i < rows; ++i)
        emit(TaskKind::apply_right_q_td_qr, {col(l_.y, j), col(l_.b, j), {x, i, k}, {x, i, j}},
             {{x, i, k}, {x, i, j}});
  }

  void right_transform(Index k) {
    apply_right(k, l_.t, M_);
    if (l_.v) apply_right(k, *l_.v, N_);
  }

  void left_transform(Index k) {
    emit(TaskKind::comp_dense_qr, {t(k, k)}, {t(k, k), col(l_.c, k)});
    for (Index p = k + 1; p < M_; ++p)
      emit(TaskKind::comp_td_qr, {t(k, k), t(p, k)}, {t(k, k), t(p, k), col(l_.c, p)});
    for (Index j = k + 1; j < N_; ++j)
      emit(TaskKind::apply_left_qt_of_dense_qr, {t(k, k), col(l_.c, k), t(k, j)}, {t(k, j)});
    for (Index p = k + 1; p < M_; ++p)
      for (Index j = k + 1; j < N_; ++j)
        emit(TaskKind::apply_left_qt_of_td_qr, {t(p, k), col(l_.c, p), t(k, j), t(p, j)},
             {t(k, j), t(p, j)});
    if (!l_.u) return;
    // U := U U_hat
    const MatrixId u = *l_.u;
    for (Index i = 0; i < M_; ++i)
      emit(TaskKind::apply_right_q_of_dense_qr, {t(k, k), col(l_.c, k), {u, i, k}}, {{u, i, k}});
    for (Index p = k + 1; p < M_; ++p)
      for (Index i = 0; i < M_; ++i)
        emit(TaskKind::apply_right_q_td_qr, {t(p, k), col(l_.c, p), {u, i, k}, {u, i, p}},
             {{u, i, k}, {u, i, p}});
  }

  void small_svd(Index k) {
    const BlockId P = one(l_.p), Q = one(l_.q);
    emit(TaskKind::svd_of_block, {t(k, k)}, {t(k, k), P, Q});
    for (Index j = k + 1; j < N_; ++j) emit(TaskKind::gemm_abta, {P, t(k, j)}, {t(k, j)});
    for (Index i = 0; i < k; ++i) emit(TaskKind::gemm_aabt, {t(i, k), Q}, {t(i, k)});
    if (l_.u)
      for (Index i = 0; i < M_; ++i) {
        const BlockId ui{*l_.u, i, k};
        emit(TaskKind::gemm_nn_oz, {ui, P}, {ui});
      }
    if (l_.v)
      for (Index i = 0; i < N_; ++i) {
        const BlockId vi{*l_.v, i, k};
        emit(TaskKind::gemm_aabt, {vi, Q}, {vi});
      }
  }

  TaskList list_;
  const UtvLayout& l_;
  int q_;
  std::uint64_t seed_;
  Index M_, N_;
};

OocMatrix identity_matrix(const fs::path& path, Index n, Index b) {
  return generate_blocks(path, n, n, b, [](Index i, Index j, Block& blk) {
    if (i == j) blk.logical().setIdentity();
  });
}

fs::path with_suffix(const fs::path& prefix, const std::string& suffix) {
  return fs::path(prefix.string() + suffix);
}

// Removes the registered scratch files when it goes out of scope.
class ScratchFiles {
 public:
  explicit ScratchFiles(bool keep) : keep_(keep) {}
  ScratchFiles(const ScratchFiles&) = delete;
  ScratchFiles& operator=(const ScratchFiles&) = delete;
  ~ScratchFiles() {
    if (keep_) return;
    std::error_code ec;
    for (const auto& p : paths_) fs::remove(p, ec);
  }
  const fs::path& add(fs::path p) { return paths_.emplace_back(std::move(p)); }

 private:
  bool keep_;
  std::vector<fs::path> paths_;
};

std::size_t resolve_capacity(const BlockStore& store, std::size_t requested) {
  return requested == 0 ? total_blocks(store) : requested;
}

}  // namespace

TaskList plan_randutv(const BlockStore& store, const UtvLayout& layout, int power_iters,
                      std::uint64_t seed) {
  OOCRR_REQUIRE(layout.block_rows >= layout.block_cols && layout.block_cols >= 1,
                "plan_randutv: needs at least as many block rows as block columns");
  OOCRR_REQUIRE(power_iters >= 0, "plan_randutv: q must be non-negative");
  OOCRR_REQUIRE(power_iters == 0 || layout.z.has_value(),
                "plan_randutv: power iteration needs a Z buffer");
  return Planner(store, layout, power_iters, seed).run();
}

std::size_t total_blocks(const BlockStore& store) {
  std::size_t n = 0;
  for (MatrixId id = 0; id < store.size(); ++id) {
    const auto& m = store.matrix(id);
    n += static_cast<std::size_t>(m.block_rows() * m.block_cols());
  }
  return n;
}

fs::path default_prefix(const fs::path& input) {
  return input.parent_path() / input.stem();
}

UtvResult randutv(const OocMatrix& a, const RandUtvConfig& cfg) {
  OOCRR_REQUIRE(a.valid(), "randutv: no input matrix");
  OOCRR_REQUIRE(a.rows() >= a.cols(), "randutv: requires m >= n");
  OOCRR_REQUIRE(cfg.power_iters >= 0, "randutv: q must be non-negative");
  const Index m = a.rows(), n = a.cols(), b = a.block_size();
  const fs::path prefix = cfg.output_prefix.empty() ? default_prefix(a.path()) : cfg.output_prefix;

  BlockStore store;
  store.set_io_delay(cfg.io_delay);
  UtvResult result;
  result.t = copy_matrix(a, with_suffix(prefix, ".T.oocb"));

  ScratchFiles scratch(cfg.keep_scratch);
  UtvLayout l;
  l.block_rows = a.block_rows();
  l.block_cols = a.block_cols();
  l.t = store.add("T", result.t);
  l.g = store.add("G", OocMatrix::create(scratch.add(with_suffix(prefix, ".G.tmp")), m, b, b), true);
  l.y = store.add("Y", OocMatrix::create(scratch.add(with_suffix(prefix, ".Y.tmp")), n, b, b), true);
  if (cfg.power_iters > 0)
    l.z = store.add("Z", OocMatrix::create(scratch.add(with_suffix(prefix, ".Z.tmp")), m, b, b), true);
  l.b = store.add("B", OocMatrix::create(scratch.add(with_suffix(prefix, ".B.tmp")), l.block_cols * b, b, b),
                  true);
  l.c = store.add("C", OocMatrix::create(scratch.add(with_suffix(prefix, ".C.tmp")), l.block_rows * b, b, b),
                  true);
  l.p = store.add("P", OocMatrix::create(scratch.add(with_suffix(prefix, ".P.tmp")), b, b, b), true);
  l.q = store.add("Q", OocMatrix::create(scratch.add(with_suffix(prefix, ".Q.tmp")), b, b, b), true);
  if (cfg.build_uv) {
    result.u = identity_matrix(with_suffix(prefix, ".U.oocb"), m, b);
    result.v = identity_matrix(with_suffix(prefix, ".V.oocb"), n, b);
    l.u = store.add("U", *result.u);
    l.v = store.add("V", *result.v);
  }

  TaskList list = plan_randutv(store, l, cfg.power_iters, cfg.seed);
  if (cfg.task_limit > 0 && cfg.task_limit < list.size()) list = list.prefix(cfg.task_limit);
  result.tasks = list.size();
  result.stats = dispatch(store, list, cfg.dispatcher, resolve_capacity(store, cfg.cache_blocks));
  return result;
}

Vector<double> singular_value_estimates(const UtvResult& result) {
  const OocMatrix& t = result.t;
  const Index b = t.block_size();
  Vector<double> d(t.cols());
  for (Index k = 0; k < t.block_cols(); ++k) {
    Block blk = t.make_block(k, k);
    t.read_slot(k, k, blk);
    const Index w = std::min(blk.rows(), blk.cols());
    for (Index i = 0; i < w; ++i) d(k * b + i) = std::abs(blk(i, i));
  }
  return d;
}

TaskList plan_qr(const BlockStore& store, MatrixId a, MatrixId s) {
  const auto& A = store.matrix(a);
  const Index M = A.block_rows(), N = A.block_cols();
  OOCRR_REQUIRE(A.rows() >= A.cols(), "plan_qr: requires m >= n");
  TaskList list(store);
  auto emit = [&](TaskKind kind, std::vector<BlockId> in, std::vector<BlockId> out) {
    list.push(Task{kind, std::move(in), std::move(out), std::nullopt});
  };
  for (Index k = 0; k < N; ++k) {
    const BlockId akk{a, k, k};
    emit(TaskKind::comp_dense_qr, {akk}, {akk, {s, k, k}});
    for (Index j = k + 1; j < N; ++j)
      emit(TaskKind::apply_left_qt_of_dense_qr, {akk, {s, k, k}, {a, k, j}}, {{a, k, j}});
    for (Index p = k + 1; p < M; ++p) {
      emit(TaskKind::comp_td_qr, {akk, {a, p, k}}, {akk, {a, p, k}, {s, p, k}});
      for (Index j = k + 1; j < N; ++j)
        emit(TaskKind::apply_left_qt_of_td_qr, {{a, p, k}, {s, p, k}, {a, k, j}, {a, p, j}},
             {{a, k, j}, {a, p, j}});
    }
  }
  return list;
}

QrResult qr_ab(const OocMatrix& a, Dispatcher dispatcher, std::size_t cache_blocks,
               std::chrono::microseconds io_delay, const fs::path& output_prefix) {
  OOCRR_REQUIRE(a.valid(), "qr: no input matrix");
  const fs::path prefix = output_prefix.empty() ? default_prefix(a.path()) : output_prefix;
  const Index b = a.block_size();
  BlockStore store;
  store.set_io_delay(io_delay);
  QrResult result;
  result.r = copy_matrix(a, with_suffix(prefix, ".R.oocb"));
  result.s = OocMatrix::create(with_suffix(prefix, ".S.oocb"), a.block_rows() * b,
                               a.block_cols() * b, b);
  const MatrixId ra = store.add("R", result.r);
  const MatrixId rs = store.add("S", result.s);
  const TaskList list = plan_qr(store, ra, rs);
  result.tasks = list.size();
  result.stats = dispatch(store, list, dispatcher, resolve_capacity(store, cache_blocks));
  return result;
}

}  // namespace oocrr
