#include "oocrr/hqrrp.hpp"

#include <map>
#include <set>

#include "oocrr/bench.hpp"
#include "oocrr/kernels.hpp"
#include "oocrr/randutv.hpp"

namespace oocrr {

namespace {

constexpr std::uint32_t sketch_tag = 0x47;

// Y = G R22 accumulated one block at a time.
class Sketch {
 public:
  Sketch(std::uint64_t seed, Index iter, Index b, Index cols)
      : seed_(seed), iter_(iter), b_(b), y_(Matrix<double>::Zero(b, cols)) {}

  // Adds G_p * blk to the Y columns listed in `ycols` (one per column of blk).
  void add(Index p, const Block& blk, const std::vector<Index>& ycols) {
    const Matrix<double>& g = gaussian(p, blk.rows());
    const Matrix<double> prod = g * blk.logical();
    for (std::size_t t = 0; t < ycols.size(); ++t) y_.col(ycols[t]) += prod.col(Index(t));
  }

  std::vector<Index> pivots(Index steps) const { return cpqr_panel(y_, steps); }

 private:
  const Matrix<double>& gaussian(Index p, Index rows) {
    auto it = g_.find(p);
    if (it == g_.end()) it = g_.emplace(p, sketch_block(seed_, iter_, p, b_, rows).logical()).first;
    return it->second;
  }

  std::uint64_t seed_;
  Index iter_;
  Index b_;
  Matrix<double> y_;
  std::map<Index, Matrix<double>> g_;
};

Block take_cols(const Block& blk, const std::vector<Index>& cols) {
  Block out(blk.stride(), blk.rows(), Index(cols.size()));
  for (std::size_t t = 0; t < cols.size(); ++t)
    out.padded().col(Index(t)).head(blk.rows()) = blk.padded().col(cols[t]).head(blk.rows());
  return out;
}

void put_cols(Block& blk, const Block& src, const std::vector<Index>& cols) {
  for (std::size_t t = 0; t < cols.size(); ++t)
    blk.padded().col(cols[t]).head(blk.rows()) = src.padded().col(Index(t)).head(blk.rows());
}

fs::path with_suffix(const fs::path& prefix, const std::string& suffix) {
  return fs::path(prefix.string() + suffix);
}

class Driver {
 public:
  Driver(const OocMatrix& a, const HqrrpConfig& cfg)
      : cfg_(cfg), a_(a), m_(a.rows()), n_(a.cols()), b_(a.block_size()), M_(a.block_rows()),
        N_(a.block_cols()) {}

  HqrrpResult run() {
    const fs::path prefix = cfg_.output_prefix.empty() ? default_prefix(a_.path()) : cfg_.output_prefix;
    const Index want = cfg_.stop_cols == 0 ? n_ : cfg_.stop_cols;
    iters_ = std::min((want + b_ - 1) / b_, N_);

    HqrrpResult res;
    res.variant = cfg_.variant;
    res.processed_cols = std::min(iters_ * b_, n_);
    if (cfg_.variant == HqrrpVariant::left) {
      res.r = OocMatrix::create(with_suffix(prefix, ".R.oocb"), m_, n_, b_);
      a_id_ = store_.add("A", a_);
    } else {
      res.r = copy_matrix(a_, with_suffix(prefix, ".R.oocb"));
    }
    res.s = OocMatrix::create(with_suffix(prefix, ".S.oocb"), M_ * b_, N_ * b_, b_);
    r_id_ = store_.add("R", res.r);
    s_id_ = store_.add("S", res.s);
    if (cfg_.build_q) {
      res.q_matrix = generate_blocks(with_suffix(prefix, ".Q.oocb"), m_, m_, b_,
                                     [](Index i, Index j, Block& blk) {
                                       if (i == j) blk.logical().setIdentity();
                                     });
      q_id_ = store_.add("Q", *res.q_matrix);
    }
    store_.set_io_delay(cfg_.io_delay);
    const std::size_t cap = cfg_.cache_blocks == 0 ? total_blocks(store_) : cfg_.cache_blocks;
    io_ = make_access(store_, cfg_.dispatcher, cap);

    perm_.resize(static_cast<std::size_t>(n_));
    std::iota(perm_.begin(), perm_.end(), Index{0});
    store_.recorder().reset();
    for (Index i = 0; i < iters_; ++i) iteration(i);
    if (cfg_.build_q) form_q();
    io_->flush();

    res.perm = perm_;
    res.stats = store_.recorder().snapshot();
    return res;
  }

 private:
  // Columns at logical positions [from, to) grouped by the physical block
  // column that holds them.
  struct Group {
    Index block = 0;
    std::vector<Index> local;  // column inside the physical block
    std::vector<Index> pos;    // logical position
  };

  Index phys(Index k) const {
    return cfg_.variant == HqrrpVariant::right_physical ? k : perm_[static_cast<std::size_t>(k)];
  }

  std::vector<Group> groups(Index from, Index to) const {
    std::map<Index, Group> g;
    for (Index k = from; k < to; ++k) {
      const Index c = phys(k);
      Group& grp = g[c / b_];
      grp.block = c / b_;
      grp.local.push_back(c % b_);
      grp.pos.push_back(k);
    }
    std::vector<Group> out;
    for (auto& [blk, grp] : g) out.push_back(std::move(grp));
    return out;
  }

  BlockId rid(Index p, Index j) const { return {r_id_, p, j}; }
  BlockId sid(Index p, Index j) const { return {s_id_, p, j}; }

  template <typename F>
  void compute(const char* label, Index i, F&& f) {
    auto& rec = store_.recorder();
    const auto t0 = rec.now_ns();
    f();
    rec.record(EventKind::compute, label, "(panel," + std::to_string(i) + ")", t0, rec.now_ns(), 0);
  }

  // Reads columns `g` of block column g.block of A for every block row and
  // brings them up to date with the first `upto` stored panels.
  std::vector<Block> replayed_columns(const Group& g, Index upto) {
    std::vector<Block> col;
    col.reserve(static_cast<std::size_t>(M_));
    for (Index p = 0; p < M_; ++p) col.push_back(take_cols(io_->load({a_id_, p, g.block}), g.local));
    for (Index l = 0; l < upto; ++l) {
      const Block v = io_->load(rid(l, l));
      const Block s = io_->load(sid(l, l));
      compute("Replay_dense", l, [&] {
        apply_left_qt(ReflectorPanel<double>{&v, &s, PanelKind::dense}, col[l]);
      });
      for (Index p = l + 1; p < M_; ++p) {
        const Block vp = io_->load(rid(p, l));
        const Block sp = io_->load(sid(p, l));
        compute("Replay_td", l, [&] {
          apply_left_qt(ReflectorPanel<double>{&vp, &sp, PanelKind::td}, col[l], col[p]);
        });
      }
    }
    return col;
  }

  std::vector<Index> choose(Index i, Index w) {
    const Index c = i * b_;
    Sketch sk(cfg_.seed, i, b_, n_ - c);
    for (const Group& g : groups(c, n_)) {
      std::vector<Index> ycols(g.pos.size());
      for (std::size_t t = 0; t < g.pos.size(); ++t) ycols[t] = g.pos[t] - c;
      if (cfg_.variant == HqrrpVariant::left) {
        const auto col = replayed_columns(g, i);
        compute("Sketch", i, [&] {
          for (Index p = i; p < M_; ++p) sk.add(p, col[p], ycols);
        });
      } else {
        for (Index p = i; p < M_; ++p) {
          const Block sub = take_cols(io_->load(rid(p, g.block)), g.local);
          compute("Sketch", i, [&] { sk.add(p, sub, ycols); });
        }
      }
    }
    std::vector<Index> lp;
    compute("Cpqr_sample", i, [&] { lp = sk.pivots(w); });
    return lp;
  }

  // Physically moves trailing column lp[k] to position k. Returns the pivoted
  // panel rows i.. when block column i changed, keeping them out of the file.
  std::optional<std::vector<Block>> swap_columns(Index i, const std::vector<Index>& lp) {
    const Index c = i * b_;
    std::set<Index> touched;
    for (std::size_t k = 0; k < lp.size(); ++k)
      if (lp[k] != Index(k)) touched.insert((c + Index(k)) / b_);
    if (touched.empty()) return std::nullopt;
    std::optional<std::vector<Block>> panel;
    if (touched.count(i)) panel.emplace();
    for (Index p = 0; p < M_; ++p) {
      std::map<Index, Block> old, fresh;
      for (Index j : touched) old.emplace(j, io_->load(rid(p, j)));
      fresh = old;
      for (std::size_t k = 0; k < lp.size(); ++k) {
        if (lp[k] == Index(k)) continue;
        const Index dst = c + Index(k), src = c + lp[k];
        fresh.at(dst / b_).padded().col(dst % b_) = old.at(src / b_).padded().col(src % b_);
      }
      for (auto& [j, blk] : fresh) {
        if (j == i && p >= i)
          panel->push_back(std::move(blk));
        else
          io_->store(rid(p, j), blk);
      }
    }
    return panel;
  }

  std::vector<Block> load_panel(Index i, Index w) {
    const Index c = i * b_;
    std::vector<Block> panel;
    for (Index p = i; p < M_; ++p) panel.emplace_back(b_, a_.block_logical_rows(p), w);
    for (const Group& g : groups(c, c + w)) {
      std::vector<Index> pcols(g.pos.size());
      for (std::size_t t = 0; t < g.pos.size(); ++t) pcols[t] = g.pos[t] - c;
      for (Index p = i; p < M_; ++p)
        put_cols(panel[p - i], take_cols(io_->load(rid(p, g.block)), g.local), pcols);
    }
    return panel;
  }

  // Left-looking: gathers the pivot columns of A, stores their finished rows
  // above the diagonal block and returns the rest.
  std::vector<Block> left_panel(Index i, Index w) {
    const Index c = i * b_;
    std::vector<Block> col;
    for (Index p = 0; p < M_; ++p) col.emplace_back(b_, a_.block_logical_rows(p), w);
    for (const Group& g : groups(c, c + w)) {
      std::vector<Index> pcols(g.pos.size());
      for (std::size_t t = 0; t < g.pos.size(); ++t) pcols[t] = g.pos[t] - c;
      const auto part = replayed_columns(g, i);
      for (Index p = 0; p < M_; ++p) put_cols(col[p], part[p], pcols);
    }
    for (Index p = 0; p < i; ++p) io_->store(rid(p, i), col[p]);
    return {std::make_move_iterator(col.begin() + i), std::make_move_iterator(col.end())};
  }

  void store_panel(Index i, Index w, const std::vector<Block>& panel) {
    const Index c = i * b_;
    if (cfg_.variant != HqrrpVariant::right_in_place) {
      for (Index p = i; p < M_; ++p) io_->store(rid(p, i), panel[p - i]);
      return;
    }
    for (const Group& g : groups(c, c + w)) {
      std::vector<Index> pcols(g.pos.size());
      for (std::size_t t = 0; t < g.pos.size(); ++t) pcols[t] = g.pos[t] - c;
      for (Index p = i; p < M_; ++p) {
        Block blk = io_->load(rid(p, g.block));
        put_cols(blk, take_cols(panel[p - i], pcols), g.local);
        io_->store(rid(p, g.block), blk);
      }
    }
  }

  void update_trailing(Index i, Index w, const std::vector<Block>& panel,
                       const std::vector<Block>& sf) {
    const Index c = i * b_;
    for (const Group& g : groups(c + w, n_)) {
      Block top_full = io_->load(rid(i, g.block));
      Block top = take_cols(top_full, g.local);
      compute("Apply_left_Qt_of_dense_QR", i, [&] {
        apply_left_qt(ReflectorPanel<double>{&panel[0], &sf[0], PanelKind::dense}, top);
      });
      for (Index p = i + 1; p < M_; ++p) {
        Block bot_full = io_->load(rid(p, g.block));
        Block bot = take_cols(bot_full, g.local);
        compute("Apply_left_Qt_of_td_QR", i, [&] {
          apply_left_qt(ReflectorPanel<double>{&panel[p - i], &sf[p - i], PanelKind::td}, top, bot);
        });
        put_cols(bot_full, bot, g.local);
        io_->store(rid(p, g.block), bot_full);
      }
      put_cols(top_full, top, g.local);
      io_->store(rid(i, g.block), top_full);
    }
  }

  void iteration(Index i) {
    const Index c = i * b_;
    const Index w = std::min(b_, n_ - c);
    const std::vector<Index> lp = choose(i, w);

    std::optional<std::vector<Block>> swapped;
    if (cfg_.variant == HqrrpVariant::right_physical) swapped = swap_columns(i, lp);
    const std::vector<Index> old(perm_.begin() + c, perm_.end());
    for (std::size_t k = 0; k < lp.size(); ++k) perm_[static_cast<std::size_t>(c) + k] = old[lp[k]];

    std::vector<Block> panel;
    if (cfg_.variant == HqrrpVariant::left)
      panel = left_panel(i, w);
    else if (swapped)
      panel = std::move(*swapped);
    else
      panel = load_panel(i, w);

    std::vector<Block> sf;
    for (Index p = i; p < M_; ++p) sf.emplace_back(b_);
    compute("Comp_dense_QR", i, [&] { comp_dense_qr(panel[0], sf[0]); });
    for (Index p = i + 1; p < M_; ++p)
      compute("Comp_td_QR", i, [&] { comp_td_qr(panel[0], panel[p - i], sf[p - i]); });
    for (Index p = i; p < M_; ++p) io_->store(sid(p, i), sf[p - i]);
    store_panel(i, w, panel);

    if (cfg_.variant != HqrrpVariant::left) update_trailing(i, w, panel, sf);
  }

  // Q = Q_0 Q_1 ... applied to the identity, last panel first.
  void form_q() {
    for (Index i = iters_ - 1; i >= 0; --i) {
      const Index w = std::min(b_, n_ - i * b_);
      std::vector<Block> panel;
      if (cfg_.variant == HqrrpVariant::right_in_place) {
        panel = load_panel(i, w);
      } else {
        for (Index p = i; p < M_; ++p) panel.push_back(io_->load(rid(p, i)));
      }
      std::vector<Block> sf;
      for (Index p = i; p < M_; ++p) sf.push_back(io_->load(sid(p, i)));
      for (Index j = 0; j < M_; ++j) {
        Block top = io_->load({q_id_, i, j});
        for (Index p = M_ - 1; p > i; --p) {
          Block bot = io_->load({q_id_, p, j});
          compute("Apply_left_Q_td", i, [&] {
            apply_left_q(ReflectorPanel<double>{&panel[p - i], &sf[p - i], PanelKind::td}, top, bot);
          });
          io_->store({q_id_, p, j}, bot);
        }
        compute("Apply_left_Q_dense", i, [&] {
          apply_left_q(ReflectorPanel<double>{&panel[0], &sf[0], PanelKind::dense}, top);
        });
        io_->store({q_id_, i, j}, top);
      }
    }
  }

  const HqrrpConfig& cfg_;
  const OocMatrix& a_;
  Index m_, n_, b_, M_, N_;
  Index iters_ = 0;
  BlockStore store_;
  std::unique_ptr<BlockAccess> io_;
  MatrixId a_id_ = 0, r_id_ = 0, s_id_ = 0, q_id_ = 0;
  std::vector<Index> perm_;
};

}  // namespace

HqrrpVariant parse_variant(const std::string& name) {
  if (name == "left") return HqrrpVariant::left;
  if (name == "rip") return HqrrpVariant::right_in_place;
  if (name == "rpp") return HqrrpVariant::right_physical;
  throw ContractError("unknown hqrrp variant '" + name + "' (expected left, rip or rpp)");
}

const char* to_string(HqrrpVariant v) {
  switch (v) {
    case HqrrpVariant::left: return "left";
    case HqrrpVariant::right_in_place: return "rip";
    case HqrrpVariant::right_physical: return "rpp";
  }
  return "?";
}

Block sketch_block(std::uint64_t seed, Index iter, Index p, Index b, Index rows) {
  Block g(b, b, rows);
  generate_normal_random(GaussianSeed{seed, sketch_tag, static_cast<std::uint64_t>(iter),
                                      static_cast<std::uint64_t>(p)},
                         g);
  return g;
}

std::vector<Index> select_pivots(const OocMatrix& trailing, Index steps, std::uint64_t seed,
                                 Index iter) {
  OOCRR_REQUIRE(trailing.valid() && trailing.cols() >= 1, "select_pivots: empty trailing matrix");
  OOCRR_REQUIRE(steps >= 0 && steps <= std::min(trailing.cols(), trailing.block_size()),
                "select_pivots: steps must not exceed the block size or column count");
  const Index b = trailing.block_size();
  Sketch sk(seed, iter, b, trailing.cols());
  for (Index j = 0; j < trailing.block_cols(); ++j) {
    std::vector<Index> ycols(static_cast<std::size_t>(trailing.block_logical_cols(j)));
    std::iota(ycols.begin(), ycols.end(), j * b);
    for (Index p = 0; p < trailing.block_rows(); ++p) {
      Block blk = trailing.make_block(p, j);
      trailing.read_slot(p, j, blk);
      sk.add(iter + p, blk, ycols);
    }
  }
  return sk.pivots(steps);
}

HqrrpResult hqrrp(const OocMatrix& a, const HqrrpConfig& cfg) {
  OOCRR_REQUIRE(a.valid(), "hqrrp: no input matrix");
  OOCRR_REQUIRE(a.rows() >= a.cols(), "hqrrp: requires m >= n");
  OOCRR_REQUIRE(cfg.block_size == 0 || cfg.block_size == a.block_size(),
                "hqrrp: block size differs from the input file's");
  OOCRR_REQUIRE(cfg.stop_cols >= 0 && cfg.stop_cols <= a.cols(),
                "hqrrp: stop_cols must lie in [0, n]");
  return Driver(a, cfg).run();
}

Matrix<double> r_factor(const HqrrpResult& result) {
  const Matrix<double> stored = export_dense(result.r);
  Matrix<double> r(stored.rows(), stored.cols());
  for (Index k = 0; k < stored.cols(); ++k) {
    const Index src = result.variant == HqrrpVariant::right_in_place ? result.perm[k] : k;
    r.col(k) = stored.col(src);
  }
  for (Index k = 0; k < result.processed_cols; ++k) r.col(k).tail(r.rows() - k - 1).setZero();
  return r;
}

std::vector<ProbePoint> write_complexity_probe(HqrrpVariant variant, const std::vector<Index>& sizes,
                                               Index b, std::uint64_t seed, const fs::path& dir) {
  std::vector<ProbePoint> out;
  for (Index n : sizes) {
    const fs::path in = dir / ("probe_" + std::to_string(n) + ".oocb");
    const OocMatrix a = generate_matrix(GenSpec{}, n, n, b, seed, in);
    HqrrpConfig cfg;
    cfg.variant = variant;
    cfg.seed = seed;
    cfg.output_prefix = dir / ("probe_" + std::to_string(n) + "_" + to_string(variant));
    const HqrrpResult res = hqrrp(a, cfg);
    out.push_back({n, res.stats.bytes_written, res.stats.bytes_read});
    std::error_code ec;
    fs::remove(in, ec);
    fs::remove(res.r.path(), ec);
    fs::remove(res.s.path(), ec);
  }
  return out;
}

}  // namespace oocrr
