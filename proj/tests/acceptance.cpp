// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "two_by_two.hpp"
#include "oocrr/bench.hpp"
#include "oocrr/hqrrp.hpp"
#include "oocrr/kernels.hpp"
#include "oocrr/oracle.hpp"
#include "overlap_probe.hpp"

using namespace oocrr;
using testutil::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs <= budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s [%d] %s: %s; %.2f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", id, name,
              o.detail.c_str(), secs, budget_s, in_time ? "" : ", exceeded");
  std::fflush(stdout);
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(const Matrix<double>& a, const Matrix<double>& b) {
  const double n = b.norm();
  return (a - b).norm() / (n > 0 ? n : 1.0);
}

// R of a QR with non-negative diagonal, from Eigen's Householder QR.
Matrix<double> positive_r(const Matrix<double>& a) {
  Matrix<double> r = a.householderQr().matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Index i = 0; i < r.rows(); ++i)
    if (r(i, i) < 0) r.row(i) *= -1.0;
  return r;
}

Outcome two_by_two_list() {
  testutil::TwoByTwoSetup fx;
  const auto& expect = testutil::two_by_two_rows();
  std::size_t match = 0;
  for (std::size_t t = 0; t < std::min(expect.size(), fx.list->size()); ++t)
    if (testutil::row_of(fx.store, (*fx.list)[t]) == expect[t]) ++match;
  const bool pass = fx.list->size() == 22 && match == 22;
  return {pass, fmt("%zu tasks, %zu/22 rows match kind, inputs, outputs and order", fx.list->size(), match)};
}

Outcome first_six_traditional() {
  testutil::TwoByTwoSetup fx;
  const IoStats s = run_traditional(fx.store, fx.list->prefix(6));
  return {s.reads == 10 && s.writes == 6,
          fmt("first six tasks: %llu reads, %llu writes (expect 10, 6)",
              (unsigned long long)s.reads, (unsigned long long)s.writes)};
}

Outcome first_six_cached() {
  testutil::TwoByTwoSetup fx;
  const IoStats s = run_cached(fx.store, fx.list->prefix(6), 7);
  return {s.reads == 4 && s.writes == 0,
          fmt("first six tasks, capacity 7: %llu reads, %llu writes (expect 4, 0)",
              (unsigned long long)s.reads, (unsigned long long)s.writes)};
}

Outcome utv_correctness() {
  double worst_res = 0, worst_orth = 0;
  bool triangular = true;
  int runs = 0;
  for (Index n : {256, 384, 512})
    for (Index b : {32, 64})
      for (int q : {0, 1, 2}) {
        TempDir dir;
        const Matrix<double> a = testutil::random_matrix(n, n, std::uint64_t(n + b + q));
        const auto f = import_dense(a, dir / "A.oocb", b);
        RandUtvConfig cfg;
        cfg.power_iters = q;
        cfg.build_uv = true;
        cfg.seed = 11;
        const auto res = randutv(f, cfg);
        const Matrix<double> t = export_dense(res.t), u = export_dense(*res.u), v = export_dense(*res.v);
        worst_res = std::max(worst_res, rel(u * t * v.transpose(), a));
        worst_orth = std::max({worst_orth, oracle::orthogonality_error(u), oracle::orthogonality_error(v)});
        triangular = triangular && Matrix<double>(t.triangularView<Eigen::StrictlyLower>()).isZero(0);
        ++runs;
      }
  return {worst_res <= 1e-12 && worst_orth <= 1e-12 && triangular,
          fmt("%d runs: max residual %.2e, max orthogonality %.2e (tol 1e-12), T triangular: %s", runs,
              worst_res, worst_orth, triangular ? "yes" : "no")};
}

Outcome utv_quality() {
  const Index n = 256, b = 64;
  const Matrix<double> a = generate_dense(parse_gen("expdecay:20"), n, n, 4);
  Vector<double> sigma(n);
  for (Index j = 0; j < n; ++j) sigma(j) = std::exp(-double(j) / 20);
  double worst[3] = {}, mean[3] = {};
  for (int q : {0, 2}) {
    TempDir dir;
    const auto f = import_dense(a, dir / "A.oocb", b);
    RandUtvConfig cfg;
    cfg.power_iters = q;
    cfg.build_uv = true;
    cfg.seed = 7;
    const auto res = randutv(f, cfg);
    const auto rep = oracle::verify_utv(a, export_dense(*res.u), export_dense(res.t),
                                        export_dense(*res.v), {64, 128}, &sigma);
    for (const auto& p : rep.lowrank_curve) worst[q] = std::max(worst[q], p.ratio());
    mean[q] = rep.mean_diag_error(128);
  }
  return {worst[0] <= 3.0 && worst[2] <= 1.5 && mean[2] < mean[0],
          fmt("max ||A-A_k||/sigma_k+1 over k in {64,128}: q=0 %.3f (<= 3.0), q=2 %.3f (<= 1.5); "
              "mean diag error %.4f -> %.4f",
              worst[0], worst[2], mean[0], mean[2])};
}

double median3(double a, double b, double c) { return std::max(std::min(a, b), std::min(std::max(a, b), c)); }

Outcome overlap_effectiveness() {
  TempDir dir;
  const Index b = 96;
  const std::size_t cache = 32;
  const auto a = generate_matrix(GenSpec{}, 6 * b, 6 * b, b, 1, dir / "A.oocb");
  const auto cal = testutil::calibrate_overlap(a, cache, dir.path());
  const double tuned = cal.cached.io / cal.cached.compute;
  // Median of three runs of each dispatcher at the tuned delay.
  double ow[3], ob[3], cw[3], cb[3];
  for (int r = 0; r < 3; ++r) {
    const auto ov = testutil::timed_randutv(a, Dispatcher::overlap, cache, cal.delay, dir / "ov");
    const auto ca = testutil::timed_randutv(a, Dispatcher::cached, cache, cal.delay, dir / "ca");
    ow[r] = ov.wall;
    ob[r] = 1.3 * std::max(ov.compute, ov.io);
    cw[r] = ca.wall;
    cb[r] = 0.9 * (ca.compute + ca.io);
  }
  const double over_ratio = median3(ow[0] / ob[0], ow[1] / ob[1], ow[2] / ob[2]);
  const double cache_ratio = median3(cw[0] / cb[0], cw[1] / cb[1], cw[2] / cb[2]);
  const bool tuned_ok = tuned >= 0.8 && tuned <= 1.2;
  return {tuned_ok && over_ratio <= 1.0 && cache_ratio >= 1.0,
          fmt("delay %lld us gives io/compute %.2f; wall(overlap) / 1.3 max(compute, io) = %.3f (<= 1); "
              "wall(cached) / 0.9 (compute + io) = %.3f (>= 1)",
              (long long)cal.delay.count(), tuned, over_ratio, cache_ratio)};
}

Outcome write_complexity() {
  TempDir dir;
  const std::vector<Index> sizes{512, 1024, 2048};
  const auto left = write_complexity_probe(HqrrpVariant::left, sizes, 64, 1, dir.path());
  const auto rip = write_complexity_probe(HqrrpVariant::right_in_place, sizes, 64, 1, dir.path());
  double lmax = 0, rmin = 1e300;
  std::string ratios;
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    const double l = double(left[k].bytes_written) / double(left[k - 1].bytes_written);
    const double r = double(rip[k].bytes_written) / double(rip[k - 1].bytes_written);
    lmax = std::max(lmax, l);
    rmin = std::min(rmin, r);
    ratios += fmt(" %lld->%lld: left %.2f rip %.2f;", (long long)sizes[k - 1], (long long)sizes[k], l, r);
  }
  return {lmax <= 4.6 && rmin >= 6.0, "write growth per doubling" + ratios + " (left <= 4.6, rip >= 6.0)"};
}

Outcome pivot_quality() {
  const Index n = 256, b = 32;
  double lo = 1e300, hi = 0;
  int mats = 0;
  const auto check = [&](const Matrix<double>& a, std::uint64_t seed) {
    TempDir dir;
    const auto f = import_dense(a, dir / "A.oocb", b);
    HqrrpConfig cfg;
    cfg.variant = HqrrpVariant::left;
    cfg.seed = seed;
    const auto res = hqrrp(f, cfg);
    const Vector<double> d = r_factor(res).diagonal().cwiseAbs();
    const Vector<double> ref = oracle::cpqr(a).R.diagonal().cwiseAbs();
    for (Index k = 0; k < 128; ++k) {
      lo = std::min(lo, d(k) / ref(k));
      hi = std::max(hi, d(k) / ref(k));
    }
    ++mats;
  };
  for (std::uint64_t s = 1; s <= 20; ++s) check(testutil::random_matrix(n, n, 500 + s), s);
  check(generate_dense(parse_gen("expdecay:20"), n, n, 4), 21);
  return {lo >= 0.1 && hi <= 10.0,
          fmt("%d matrices, |R_hqrrp(k,k)| / |R_cpqr(k,k)| for k <= 128 in [%.3f, %.3f] (need [0.1, 10])",
              mats, lo, hi)};
}

Outcome dispatcher_equivalence() {
  TempDir dir;
  const auto a = import_dense(testutil::random_matrix(230, 200, 31), dir / "A.oocb", 32);
  const char* names[] = {"trad", "cache", "overlap"};
  const Dispatcher ds[] = {Dispatcher::traditional, Dispatcher::cached, Dispatcher::overlap};
  for (int k = 0; k < 3; ++k) {
    RandUtvConfig cfg;
    cfg.power_iters = 1;
    cfg.build_uv = true;
    cfg.seed = 5;
    cfg.dispatcher = ds[k];
    cfg.cache_blocks = 10;
    cfg.output_prefix = dir / names[k];
    randutv(a, cfg);
  }
  int identical = 0;
  for (const char* f : {".T.oocb", ".U.oocb", ".V.oocb"})
    for (int k = 1; k < 3; ++k)
      identical += testutil::same_bytes(dir / (std::string("trad") + f), dir / (std::string(names[k]) + f));
  return {identical == 6, fmt("%d/6 of T, U, V under cache and overlap byte-identical to trad", identical)};
}

Outcome kernel_oracles() {
  double gemm_err = 0, svd_err = 0, td_err = 0, trip_err = 0;
  for (Index n : {7, 32, 64}) {
    const Matrix<double> A = testutil::random_matrix(n, n, 40 + n), B = testutil::random_matrix(n, n, 41 + n);
    Block a = Block::from(A, n), bb = Block::from(B, n), c(n);
    gemm(GemmMode::tn_oz, a, bb, c);
    const Matrix<double> ref = oracle::gemm_tn(A, B), mag = oracle::gemm_tn(A.cwiseAbs(), B.cwiseAbs());
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        gemm_err = std::max(gemm_err, std::abs(c(i, j) - ref(i, j)) / std::max(1.0, mag(i, j)));

    Block s(n), u(n), vt(n);
    Block w = Block::from(A, n);
    const Vector<double> sig = svd_block(w, u, vt);
    const Vector<double> sref = oracle::svd(A).sigma;
    svd_err = std::max(svd_err, ((sig - sref).array().abs() / sref.array()).maxCoeff());

    const Matrix<double> rt = A.triangularView<Eigen::Upper>();
    Block top = Block::from(rt, n), bot = Block::from(B, n);
    const auto panel = comp_td_qr(top, bot, s);
    Matrix<double> stacked(2 * n, n);
    stacked << rt, B;
    td_err = std::max(td_err, rel(top.logical().triangularView<Eigen::Upper>(), positive_r(stacked)));

    const Matrix<double> X = testutil::random_matrix(2 * n, 5, 42 + n);
    Block xt = Block::from(X.topRows(n), n), xb = Block::from(X.bottomRows(n), n);
    apply_left_qt(panel, xt, xb);
    apply_left_q(panel, xt, xb);
    Matrix<double> back(2 * n, 5);
    back << xt.logical(), xb.logical();
    trip_err = std::max(trip_err, rel(back, X));

    Block d = Block::from(A, n), sd(n);
    const auto dense = comp_dense_qr(d, sd);
    Block y = Block::from(X.topRows(n), n);
    apply_left_qt(dense, y);
    apply_left_q(dense, y);
    trip_err = std::max(trip_err, rel(y.logical(), X.topRows(n)));
  }
  return {gemm_err <= 1e-15 && svd_err <= 1e-11 && td_err <= 1e-13 && trip_err <= 1e-13,
          fmt("gemm %.1e (1e-15), svd %.1e (1e-11), td-QR %.1e (1e-13), round trips %.1e (1e-13)", gemm_err,
              svd_err, td_err, trip_err)};
}

}  // namespace

int main() {
  criterion(1, "task list of the 2x2-block randUTV", 1, two_by_two_list);
  criterion(2, "traditional dispatch I/O", 1, first_six_traditional);
  criterion(3, "7-block LRU cache I/O", 1, first_six_cached);
  criterion(4, "randUTV correctness", 120, utv_correctness);
  criterion(5, "rank-revealing quality", 60, utv_quality);
  criterion(6, "compute/I-O overlap", 120, overlap_effectiveness);
  criterion(7, "left-looking write complexity", 300, write_complexity);
  criterion(8, "HQRRP pivot quality", 120, pivot_quality);
  criterion(9, "dispatcher equivalence", 60, dispatcher_equivalence);
  criterion(10, "kernel oracle suite", 60, kernel_oracles);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures > 0 ? 1 : 0;
}
