#include "oocrr/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "oocrr/kernels.hpp"

namespace oocrr {

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    OOCRR_REQUIRE(used == item.size() && !item.empty(), "gen: bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// Entry (i, j) of the seeded Gaussian matrix; independent of the block size.
double gaussian_entry(std::uint64_t key, Index m, Index i, Index j) {
  return detail::normal_at(key, static_cast<std::uint64_t>(j * m + i));
}

std::uint64_t gen_key(std::uint64_t seed, std::uint32_t tag) {
  return detail::stream_key(GaussianSeed{seed, tag, 0, 0});
}

Matrix<double> gaussian(Index m, Index n, std::uint64_t key) {
  Matrix<double> g(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) g(i, j) = gaussian_entry(key, m, i, j);
  return g;
}

Matrix<double> with_spectrum(const Vector<double>& s, Index m, Index n, std::uint64_t seed) {
  const Index r = s.size();
  const Matrix<double> u = random_orthonormal(m, r, seed);
  const Matrix<double> v = random_orthonormal(n, r, seed ^ 0x5bd1e995ULL);
  return u * s.asDiagonal() * v.transpose();
}

std::int64_t union_length(std::vector<std::pair<std::int64_t, std::int64_t>> iv) {
  std::sort(iv.begin(), iv.end());
  std::int64_t total = 0, start = 0, end = 0;
  bool open = false;
  for (const auto& [a, b] : iv) {
    if (!open || a > end) {
      if (open) total += end - start;
      start = a;
      end = b;
      open = true;
    } else {
      end = std::max(end, b);
    }
  }
  if (open) total += end - start;
  return total;
}

bool is_io(const TraceEvent& e) { return e.kind != EventKind::compute; }

std::pair<std::int64_t, std::int64_t> time_range(const std::vector<TraceEvent>& events) {
  std::int64_t t0 = events.front().t_start_ns, t1 = events.front().t_end_ns;
  for (const auto& e : events) {
    t0 = std::min(t0, e.t_start_ns);
    t1 = std::max(t1, e.t_end_ns);
  }
  return {t0, t1};
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

GenSpec parse_gen(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  GenSpec spec;
  if (name == "randn") {
    OOCRR_REQUIRE(arg.empty(), "gen: randn takes no argument");
    spec.kind = GenKind::randn;
  } else if (name == "expdecay") {
    spec.kind = GenKind::expdecay;
    if (!arg.empty()) spec.rate = parse_list(arg).at(0);
    OOCRR_REQUIRE(spec.rate > 0, "gen: expdecay rate must be positive");
  } else if (name == "diag") {
    spec.kind = GenKind::diag;
    spec.values = parse_list(arg);
    OOCRR_REQUIRE(!spec.values.empty(), "gen: diag needs a value list");
  } else if (name == "rank") {
    spec.kind = GenKind::rank;
    const auto v = parse_list(arg);
    OOCRR_REQUIRE(v.size() == 1 && v[0] >= 0 && v[0] == std::floor(v[0]),
                  "gen: rank needs a non-negative integer");
    spec.rank = static_cast<Index>(v[0]);
  } else {
    throw ContractError("gen: unknown kind '" + name + "'");
  }
  return spec;
}

Matrix<double> random_orthonormal(Index m, Index n, std::uint64_t seed) {
  OOCRR_REQUIRE(n <= m, "random_orthonormal: needs n <= m");
  const Eigen::HouseholderQR<Matrix<double>> qr(gaussian(m, n, gen_key(seed, 1)));
  return qr.householderQ() * Matrix<double>::Identity(m, n);
}

Matrix<double> generate_dense(const GenSpec& spec, Index m, Index n, std::uint64_t seed) {
  OOCRR_REQUIRE(m >= 1 && n >= 1, "gen: sizes must be positive");
  const Index r = std::min(m, n);
  switch (spec.kind) {
    case GenKind::randn:
      return gaussian(m, n, gen_key(seed, 0));
    case GenKind::expdecay: {
      Vector<double> s(r);
      for (Index j = 0; j < r; ++j) s(j) = std::exp(-double(j) / spec.rate);
      return with_spectrum(s, m, n, seed);
    }
    case GenKind::diag: {
      OOCRR_REQUIRE(static_cast<Index>(spec.values.size()) <= r, "gen: diag list longer than min(m, n)");
      Matrix<double> a = Matrix<double>::Zero(m, n);
      for (std::size_t k = 0; k < spec.values.size(); ++k) a(Index(k), Index(k)) = spec.values[k];
      return a;
    }
    case GenKind::rank:
      OOCRR_REQUIRE(spec.rank <= r, "gen: rank exceeds min(m, n)");
      if (spec.rank == 0) return Matrix<double>::Zero(m, n);
      return with_spectrum(Vector<double>::Ones(spec.rank), m, n, seed);
  }
  return {};
}

OocMatrix generate_matrix(const GenSpec& spec, Index m, Index n, Index b, std::uint64_t seed,
                          const fs::path& path) {
  OOCRR_REQUIRE(m >= 1 && n >= 1 && b >= 1, "gen: sizes must be positive");
  if (spec.kind != GenKind::randn) return import_dense(generate_dense(spec, m, n, seed), path, b);
  const std::uint64_t key = gen_key(seed, 0);
  return generate_blocks(path, m, n, b, [&](Index bi, Index bj, Block& blk) {
    for (Index j = 0; j < blk.cols(); ++j)
      for (Index i = 0; i < blk.rows(); ++i) blk(i, j) = gaussian_entry(key, m, bi * b + i, bj * b + j);
  });
}

double BenchRecord::scaled_time() const {
  const double nn = static_cast<double>(n);
  return n > 0 ? wall_seconds * 1e10 / (nn * nn * nn) : 0.0;
}

const char* BenchRecord::csv_header() {
  return "algorithm,n,b,q,dispatcher,cache_blocks,wall_seconds,scaled_time,reads,writes,"
         "bytes_read,bytes_written,io_seconds,compute_seconds";
}

std::string BenchRecord::csv_row() const {
  std::ostringstream os;
  os.precision(9);
  os << algorithm << ',' << n << ',' << b << ',' << q << ',' << dispatcher << ',' << cache_blocks
     << ',' << wall_seconds << ',' << scaled_time() << ',' << reads << ',' << writes << ','
     << bytes_read << ',' << bytes_written << ',' << io_seconds << ',' << compute_seconds;
  return os.str();
}

BenchRecord make_record(std::string algorithm, Index n, Index b, int q, Dispatcher d,
                        std::size_t cache_blocks, const IoStats& stats) {
  BenchRecord r;
  r.algorithm = std::move(algorithm);
  r.n = n;
  r.b = b;
  r.q = q;
  r.dispatcher = to_string(d);
  r.cache_blocks = cache_blocks;
  r.wall_seconds = double(stats.wall_ns) * 1e-9;
  r.reads = stats.reads;
  r.writes = stats.writes;
  r.bytes_read = stats.bytes_read;
  r.bytes_written = stats.bytes_written;
  r.io_seconds = double(stats.io_ns()) * 1e-9;
  r.compute_seconds = double(stats.compute_ns()) * 1e-9;
  return r;
}

void append_csv(const fs::path& path, const BenchRecord& rec) {
  std::error_code ec;
  const bool fresh = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open " + path.string() + " for appending");
  if (fresh) out << BenchRecord::csv_header() << '\n';
  out << rec.csv_row() << '\n';
  if (!out) throw IoError("write failed on " + path.string());
}

GanttSummary summarize(const std::vector<TraceEvent>& events) {
  GanttSummary s;
  if (events.empty()) return s;
  const auto [t0, t1] = time_range(events);
  s.span_ns = t1 - t0;
  std::vector<std::pair<std::int64_t, std::int64_t>> io, comp;
  for (const auto& e : events) (is_io(e) ? io : comp).emplace_back(e.t_start_ns, e.t_end_ns);
  s.io_busy_ns = union_length(std::move(io));
  s.compute_busy_ns = union_length(std::move(comp));
  return s;
}

std::string render_gantt_text(const std::vector<TraceEvent>& events, int width) {
  OOCRR_REQUIRE(width >= 1, "gantt: width must be positive");
  if (events.empty()) return {};
  const auto [t0, t1] = time_range(events);
  const double span = std::max<std::int64_t>(t1 - t0, 1);
  std::string io(width, '.'), comp(width, '.');
  for (const auto& e : events) {
    int c0 = static_cast<int>(double(e.t_start_ns - t0) / span * width);
    int c1 = static_cast<int>(std::ceil(double(e.t_end_ns - t0) / span * width));
    c0 = std::clamp(c0, 0, width - 1);
    c1 = std::clamp(std::max(c1, c0 + 1), 1, width);
    const char mark = e.kind == EventKind::read ? 'R' : e.kind == EventKind::write ? 'W' : '#';
    std::string& lane = is_io(e) ? io : comp;
    for (int c = c0; c < c1; ++c) lane[c] = mark;
  }
  const GanttSummary s = summarize(events);
  std::ostringstream os;
  os.precision(3);
  os << "I/O     |" << io << "| busy " << s.io_fraction() << '\n';
  os << "compute |" << comp << "| busy " << s.compute_fraction() << '\n';
  os << "span " << double(s.span_ns) * 1e-6 << " ms\n";
  return os.str();
}

std::string render_gantt_svg(const std::vector<TraceEvent>& events, int width) {
  OOCRR_REQUIRE(width >= 1, "gantt: width must be positive");
  constexpr int lane_h = 20, pad = 70;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width + pad + 10
     << "\" height=\"" << 3 * lane_h + 20 << "\">\n";
  os << "<text x=\"4\" y=\"" << 10 + lane_h * 3 / 4 << "\" font-size=\"12\">I/O</text>\n";
  os << "<text x=\"4\" y=\"" << 20 + lane_h + lane_h * 3 / 4 << "\" font-size=\"12\">compute</text>\n";
  if (!events.empty()) {
    const auto [t0, t1] = time_range(events);
    const double span = std::max<std::int64_t>(t1 - t0, 1);
    for (const auto& e : events) {
      const double x = pad + double(e.t_start_ns - t0) / span * width;
      const double w = std::max(double(e.duration_ns()) / span * width, 0.5);
      const int y = is_io(e) ? 10 : 20 + lane_h;
      const char* fill = e.kind == EventKind::read ? "#4a90d9" : e.kind == EventKind::write ? "#d9534f" : "#5cb85c";
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << lane_h
         << "\" fill=\"" << fill << "\"><title>" << to_string(e.kind) << ' '
         << xml_escape(e.label) << ' ' << xml_escape(e.block) << "</title></rect>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace oocrr
