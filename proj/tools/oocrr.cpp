// Command-line front end: generation, factorization drivers, verification,
// file inspection and trace rendering.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "oocrr/bench.hpp"
#include "oocrr/hqrrp.hpp"
#include "oocrr/oracle.hpp"
#include "oocrr/randutv.hpp"

using namespace oocrr;

namespace {

struct Common {
  Index block_size = 0;
  std::uint64_t seed = 0;
  std::string dispatcher = "trad";
  std::size_t cache_blocks = 0;
  long io_delay_us = 0;
  std::string trace;
  std::string csv;
  std::string prefix;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--block-size,-b", c.block_size,
                  "Block size; differs from the file's -> the input is re-blocked first");
  app->add_option("--seed", c.seed, "Seed for every random draw");
  app->add_option("--dispatcher", c.dispatcher, "trad | cache | overlap")
      ->check(CLI::IsMember({"trad", "cache", "overlap"}));
  app->add_option("--cache-blocks", c.cache_blocks, "Cache capacity in blocks (0 = everything)");
  app->add_option("--io-delay-us", c.io_delay_us, "Extra latency per block transfer (testing)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--trace", c.trace, "Write the event trace as JSON lines");
  app->add_option("--csv", c.csv, "Append a benchmark record to this CSV file");
  app->add_option("--output-prefix,-o", c.prefix, "Output prefix (default: input path minus .oocb)");
}

fs::path prefix_for(const Common& c, const fs::path& input) {
  return c.prefix.empty() ? default_prefix(input) : fs::path(c.prefix);
}

// Opens the input, re-blocking it next to the outputs when --block-size asks
// for a different tile size.
OocMatrix open_input(const std::string& path, const Common& c, const fs::path& prefix) {
  OocMatrix a = OocMatrix::open(path);
  if (c.block_size == 0 || c.block_size == a.block_size()) return a;
  std::cout << "re-blocking " << path << " from b=" << a.block_size() << " to b=" << c.block_size
            << "\n";
  return reblock(a, fs::path(prefix.string() + ".input.oocb"), c.block_size);
}

void write_trace(const Common& c, const IoStats& stats) {
  if (c.trace.empty()) return;
  std::ofstream out(c.trace);
  if (!out) throw IoError("cannot open " + c.trace);
  write_trace_jsonl(stats, out);
}

void report(const std::string& algorithm, Index n, Index b, int q, const Common& c,
            std::size_t tasks, const IoStats& stats) {
  const BenchRecord rec = make_record(algorithm, n, b, q, parse_dispatcher(c.dispatcher),
                                      c.cache_blocks, stats);
  std::cout << std::setprecision(6);
  if (tasks > 0) std::cout << "tasks          " << tasks << "\n";
  std::cout << "reads          " << rec.reads << "  (" << rec.bytes_read << " bytes)\n"
            << "writes         " << rec.writes << "  (" << rec.bytes_written << " bytes)\n"
            << "wall           " << rec.wall_seconds << " s\n"
            << "io / compute   " << rec.io_seconds << " s / " << rec.compute_seconds << " s\n"
            << "scaled time    " << rec.scaled_time() << "  (wall * 1e10 / n^3)\n";
  if (!c.csv.empty()) append_csv(c.csv, rec);
  write_trace(c, stats);
}

std::vector<Index> parse_ranks(const std::string& text) {
  std::vector<Index> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stol(item));
    } catch (const std::exception&) {
      throw ContractError("bad rank '" + item + "'");
    }
  }
  return out;
}

void print_report(const oracle::ErrorReport& rep, Index diag_upto, const std::string& csv,
                  const std::string& kind) {
  std::cout << std::scientific << std::setprecision(3);
  std::cout << "residual_rel   " << rep.residual_rel << "\n"
            << "orth_u         " << rep.orth_u << "\n"
            << "orth_v         " << rep.orth_v << "\n";
  if (!rep.diag_vs_sigma.empty() && diag_upto > 0)
    std::cout << "mean diag err  " << rep.mean_diag_error(diag_upto) << "  (first " << diag_upto
              << " diagonal entries vs sigma)\n";
  if (!rep.lowrank_curve.empty()) {
    std::cout << std::setw(8) << "k" << std::setw(14) << "||A-A_k||_2" << std::setw(14)
              << "sigma_k+1" << std::setw(12) << "ratio" << "\n";
    for (const auto& p : rep.lowrank_curve)
      std::cout << std::setw(8) << p.k << std::setw(14) << p.error << std::setw(14) << p.sigma_next
                << std::setw(12) << std::fixed << p.ratio() << std::scientific << "\n";
  }
  if (csv.empty()) return;
  std::error_code ec;
  const bool fresh = !fs::exists(csv, ec) || fs::file_size(csv, ec) == 0;
  std::ofstream out(csv, std::ios::app);
  if (!out) throw IoError("cannot open " + csv);
  if (fresh) out << "kind,k,residual_rel,orth_u,orth_v,error,sigma_next,ratio\n";
  out << std::setprecision(9);
  if (rep.lowrank_curve.empty())
    out << kind << ",," << rep.residual_rel << ',' << rep.orth_u << ',' << rep.orth_v << ",,,\n";
  for (const auto& p : rep.lowrank_curve)
    out << kind << ',' << p.k << ',' << rep.residual_rel << ',' << rep.orth_u << ',' << rep.orth_v
        << ',' << p.error << ',' << p.sigma_next << ',' << p.ratio() << '\n';
}

void save_perm(const fs::path& path, const HqrrpResult& res) {
  nlohmann::json j;
  j["variant"] = to_string(res.variant);
  j["processed_cols"] = res.processed_cols;
  j["perm"] = res.perm;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << j.dump() << '\n';
}

HqrrpResult load_qr(const fs::path& prefix) {
  std::ifstream in(fs::path(prefix.string() + ".perm.json"));
  if (!in) throw IoError(prefix.string() + ".perm.json: cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(prefix.string() + ".perm.json: " + e.what());
  }
  HqrrpResult res;
  res.variant = parse_variant(j.at("variant").get<std::string>());
  res.processed_cols = j.at("processed_cols").get<Index>();
  res.perm = j.at("perm").get<std::vector<Index>>();
  res.r = OocMatrix::open(prefix.string() + ".R.oocb");
  return res;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Out-of-core randomized rank-revealing factorizations"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a test matrix");
  std::string kind = "randn", gen_out;
  Index rows = 0, cols = 0, gen_b = 64;
  std::uint64_t gen_seed = 0;
  gen->add_option("--kind", kind, "randn | expdecay[:rate] | diag:v0,v1,... | rank:r");
  gen->add_option("--rows,-m", rows, "Rows (diag defaults to the list length)");
  gen->add_option("--cols,-n", cols, "Columns (default: rows)");
  gen->add_option("--block-size,-b", gen_b, "Block size")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("out", gen_out, "Output .oocb file")->required();

  // factorizations
  Common hc, uc, qc;
  std::string h_in, u_in, q_in, variant = "left";
  Index stop_cols = 0;
  bool build_q = false, build_uv = false;
  int power = 0;
  auto* hq = app.add_subcommand("hqrrp", "Randomized column-pivoted QR");
  add_common(hq, hc);
  hq->add_option("--variant", variant, "left | rip | rpp")->check(CLI::IsMember({"left", "rip", "rpp"}));
  hq->add_option("--stop-cols", stop_cols, "Stop after this many columns (rounded up to a block)");
  hq->add_flag("--build-q", build_q, "Form Q explicitly (<prefix>.Q.oocb)");
  hq->add_option("input", h_in, "Input .oocb")->required();

  auto* ut = app.add_subcommand("randutv", "Randomized UTV by blocks");
  add_common(ut, uc);
  ut->add_option("--q", power, "Power iterations")->check(CLI::NonNegativeNumber);
  ut->add_flag("--build-uv", build_uv, "Accumulate U and V");
  std::size_t task_limit = 0;
  ut->add_option("--task-limit", task_limit, "Run only the first N tasks (outputs are partial)");
  ut->add_option("input", u_in, "Input .oocb")->required();

  auto* qr = app.add_subcommand("qr", "Unpivoted QR by blocks (performance reference)");
  add_common(qr, qc);
  qr->add_option("input", q_in, "Input .oocb")->required();

  // verify
  auto* ver = app.add_subcommand("verify", "Check a factorization against the oracles");
  std::string v_kind, v_in, v_prefix, v_ranks, v_csv;
  ver->add_option("kind", v_kind, "utv | qr")->required()->check(CLI::IsMember({"utv", "qr"}));
  ver->add_option("input", v_in, "Original .oocb")->required();
  ver->add_option("--prefix", v_prefix, "Prefix of the factor files (default: from input)");
  ver->add_option("--ranks", v_ranks, "Comma-separated ranks for the low-rank curve");
  ver->add_option("--csv", v_csv, "Append the report to this CSV file");

  // info / trace
  auto* info = app.add_subcommand("info", "Print an .oocb header");
  std::string i_in;
  info->add_option("input", i_in, "File")->required();

  auto* tr = app.add_subcommand("trace", "Render a JSON-lines trace as a Gantt chart");
  std::string t_in, t_svg;
  int t_width = 100;
  tr->add_option("input", t_in, "Trace file")->required();
  tr->add_option("--svg", t_svg, "Also write an SVG chart");
  tr->add_option("--width", t_width, "Characters per lane")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      const GenSpec spec = parse_gen(kind);
      if (rows == 0 && spec.kind == GenKind::diag) rows = Index(spec.values.size());
      if (cols == 0) cols = rows;
      OOCRR_REQUIRE(rows >= 1, "gen: --rows is required");
      const auto a = generate_matrix(spec, rows, cols, gen_b, gen_seed, gen_out);
      std::cout << "wrote " << gen_out << " (" << a.rows() << " x " << a.cols() << ", b=" << a.block_size()
                << ")\n";
    } else if (hq->parsed()) {
      const fs::path prefix = prefix_for(hc, h_in);
      const OocMatrix a = open_input(h_in, hc, prefix);
      HqrrpConfig cfg;
      cfg.stop_cols = stop_cols;
      cfg.variant = parse_variant(variant);
      cfg.build_q = build_q;
      cfg.seed = hc.seed;
      cfg.dispatcher = parse_dispatcher(hc.dispatcher);
      cfg.cache_blocks = hc.cache_blocks;
      cfg.io_delay = std::chrono::microseconds(hc.io_delay_us);
      cfg.output_prefix = prefix;
      const HqrrpResult res = hqrrp(a, cfg);
      save_perm(fs::path(prefix.string() + ".perm.json"), res);
      std::cout << "hqrrp " << variant << ": " << res.processed_cols << " of " << a.cols()
                << " columns -> " << res.r.path().string() << "\n";
      report(std::string("hqrrp_") + variant, a.cols(), a.block_size(), 0, hc, 0, res.stats);
    } else if (ut->parsed()) {
      const fs::path prefix = prefix_for(uc, u_in);
      const OocMatrix a = open_input(u_in, uc, prefix);
      RandUtvConfig cfg;
      cfg.power_iters = power;
      cfg.build_uv = build_uv;
      cfg.seed = uc.seed;
      cfg.dispatcher = parse_dispatcher(uc.dispatcher);
      cfg.cache_blocks = uc.cache_blocks;
      cfg.io_delay = std::chrono::microseconds(uc.io_delay_us);
      cfg.output_prefix = prefix;
      cfg.task_limit = task_limit;
      const UtvResult res = randutv(a, cfg);
      std::cout << "randutv q=" << power << " -> " << res.t.path().string() << "\n";
      const Vector<double> est = singular_value_estimates(res);
      std::cout << "|T(k,k)|       ";
      for (Index k = 0; k < std::min<Index>(est.size(), 6); ++k) std::cout << est(k) << ' ';
      std::cout << (est.size() > 6 ? "...\n" : "\n");
      report("randutv", a.cols(), a.block_size(), power, uc, res.tasks, res.stats);
    } else if (qr->parsed()) {
      const fs::path prefix = prefix_for(qc, q_in);
      const OocMatrix a = open_input(q_in, qc, prefix);
      const QrResult res = qr_ab(a, parse_dispatcher(qc.dispatcher), qc.cache_blocks,
                                 std::chrono::microseconds(qc.io_delay_us), prefix);
      std::cout << "qr -> " << res.r.path().string() << "\n";
      report("qr", a.cols(), a.block_size(), 0, qc, res.tasks, res.stats);
    } else if (ver->parsed()) {
      const fs::path prefix = v_prefix.empty() ? default_prefix(v_in) : fs::path(v_prefix);
      const Matrix<double> a = export_dense(OocMatrix::open(v_in));
      const auto ranks = parse_ranks(v_ranks);
      oracle::ErrorReport rep;
      Index diag_upto = a.cols();
      if (v_kind == "utv") {
        const auto open = [&](const char* s) { return export_dense(OocMatrix::open(prefix.string() + s)); };
        rep = oracle::verify_utv(a, open(".U.oocb"), open(".T.oocb"), open(".V.oocb"), ranks);
      } else {
        const HqrrpResult res = load_qr(prefix);
        OOCRR_REQUIRE(fs::exists(prefix.string() + ".Q.oocb"),
                      "verify: " + prefix.string() + ".Q.oocb missing (run hqrrp with --build-q)");
        const Matrix<double> q = export_dense(OocMatrix::open(prefix.string() + ".Q.oocb"));
        const bool complete = res.processed_cols == a.cols();
        OOCRR_REQUIRE(complete || ranks.empty(), "verify: low-rank curve needs a complete R");
        rep = oracle::verify_qr(a, q, r_factor(res), res.perm, ranks, res.processed_cols);
        diag_upto = res.processed_cols;
      }
      print_report(rep, diag_upto, v_csv, v_kind);
    } else if (info->parsed()) {
      const OocMatrix a = OocMatrix::open(i_in);
      std::cout << "path           " << a.path().string() << "\n"
                << "magic          OOCB\n"
                << "version        " << OocMatrix::format_version << "\n"
                << "element type   " << a.element_type() << " (binary64)\n"
                << "m x n          " << a.rows() << " x " << a.cols() << "\n"
                << "block size     " << a.block_size() << "\n"
                << "blocks         " << a.block_rows() << " x " << a.block_cols() << "\n"
                << "file size      " << a.file_size() << " bytes\n";
    } else if (tr->parsed()) {
      std::ifstream in(t_in);
      if (!in) throw IoError(t_in + ": cannot open");
      const auto events = read_trace_jsonl(in);
      std::cout << render_gantt_text(events, t_width);
      if (!t_svg.empty()) {
        std::ofstream out(t_svg);
        if (!out) throw IoError("cannot open " + t_svg);
        out << render_gantt_svg(events);
      }
    }
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
