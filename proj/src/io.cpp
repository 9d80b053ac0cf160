#include "degpop/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace degpop::io {

namespace {

void append(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), os_(path, std::ios::binary | std::ios::trunc) {
    if (!os_) throw IoError("cannot open for writing", path.string());
    buf_.reserve(1 << 20);
  }
  std::string& buffer() { return buf_; }
  void flush_if_full() {
    if (buf_.size() > (1 << 20) - 256) flush();
  }
  void close() {
    flush();
    os_.close();
    if (!os_) throw IoError("write failed", path_.string());
  }

 private:
  void flush() {
    os_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!os_) throw IoError("write failed", path_.string());
    buf_.clear();
  }
  std::filesystem::path path_;
  std::ofstream os_;
  std::string buf_;
};

double parse_double(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError("malformed number '" + std::string(s) + "' on line " + std::to_string(line), path.string());
  }
  return v;
}

bool same_coord(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

std::string format_double(double v) {
  std::string s;
  append(s, v);
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  Writer w(path);
  w.buffer() = text;
  w.close();
}

void write_field_csv(std::span<const double> t, std::span<const double> a, std::span<const double> x,
                     std::span<const double> values, const std::filesystem::path& path) {
  if (!t.empty() && a.empty()) throw ShapeError("field csv: a time axis needs an age axis");
  const std::size_t nt = std::max<std::size_t>(t.size(), 1), na = std::max<std::size_t>(a.size(), 1);
  if (x.empty() || values.size() != nt * na * x.size()) throw ShapeError("field csv: values do not match the axes");
  Writer w(path);
  std::string& b = w.buffer();
  b += t.empty() ? (a.empty() ? "x,value\n" : "a,x,value\n") : "t,a,x,value\n";
  std::size_t k = 0;
  for (std::size_t n = 0; n < nt; ++n)
    for (std::size_t j = 0; j < na; ++j)
      for (std::size_t i = 0; i < x.size(); ++i, ++k) {
        if (!t.empty()) {
          append(b, t[n]);
          b += ',';
        }
        if (!a.empty()) {
          append(b, a[j]);
          b += ',';
        }
        append(b, x[i]);
        b += ',';
        append(b, values[k]);
        b += '\n';
        w.flush_if_full();
      }
  w.close();
}

void export_field_csv(const Field& field, const std::filesystem::path& path) {
  const Grid& g = field.grid();
  std::vector<double> t, a, x(field.nodes());
  if (field.rank() == Rank::Trajectory)
    for (int n = 0; n < g.time_levels(); ++n) t.push_back(g.t(n));
  if (field.rank() != Rank::Profile)
    for (int j = 0; j < g.age_layers(); ++j) a.push_back(g.a(j));
  for (int i = 0; i < field.nodes(); ++i) x[i] = g.x(i);
  write_field_csv(t, a, x, field.values(), path);
}

Field import_field_csv(const std::filesystem::path& path, const Grid& grid) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading", path.string());
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty file", path.string());
  Rank rank;
  int coords;
  if (line == "t,a,x,value") {
    rank = Rank::Trajectory;
    coords = 3;
  } else if (line == "a,x,value") {
    rank = Rank::Slice;
    coords = 2;
  } else if (line == "x,value") {
    rank = Rank::Profile;
    coords = 1;
  } else {
    throw IoError("unrecognized header '" + line + "'", path.string());
  }
  Field f(grid, rank);
  std::size_t row = 0, lineno = 1;
  const int I = f.nodes(), J = f.layers();
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (row >= f.size()) throw ShapeError("field csv " + path.string() + ": more rows than the grid holds");
    double vals[4];
    std::size_t start = 0;
    for (int c = 0; c <= coords; ++c) {
      const std::size_t end = c < coords ? line.find(',', start) : line.size();
      if (end == std::string::npos) throw IoError("too few columns on line " + std::to_string(lineno), path.string());
      vals[c] = parse_double(std::string_view(line).substr(start, end - start), path, lineno);
      start = end + 1;
    }
    const int i = static_cast<int>(row % I);
    const int j = static_cast<int>((row / I) % J);
    const int n = static_cast<int>(row / (static_cast<std::size_t>(I) * J));
    double expect[3];
    int k = 0;
    if (rank == Rank::Trajectory) expect[k++] = grid.t(n);
    if (rank != Rank::Profile) expect[k++] = grid.a(j);
    expect[k++] = grid.x(i);
    for (int c = 0; c < coords; ++c)
      if (!same_coord(vals[c], expect[c]))
        throw ShapeError("field csv " + path.string() + ": coordinates on line " + std::to_string(lineno) +
                         " do not match the grid");
    f(n, j, i) = vals[coords];
    ++row;
  }
  if (row != f.size())
    throw ShapeError("field csv " + path.string() + ": expected " + std::to_string(f.size()) + " rows, found " +
                     std::to_string(row));
  return f;
}

void export_reports_csv(const std::vector<CertificateReport>& reports, const std::filesystem::path& path) {
  Writer w(path);
  std::string& b = w.buffer();
  b += "inequality,s,delta,sample_id,seed,lhs,rhs,ratio,log_scale,anomaly,region,grid,note\n";
  for (const auto& r : reports) {
    b += to_string(r.id);
    for (double v : {r.s, r.delta}) {
      b += ',';
      append(b, v);
    }
    b += ',' + std::to_string(r.sample_id) + ',' + std::to_string(r.seed);
    for (double v : {r.lhs, r.rhs, r.ratio, r.log_scale}) {
      b += ',';
      append(b, v);
    }
    b += r.anomaly ? ",1," : ",0,";
    b += quoted(r.region) + ',' + quoted(r.grid) + ',' + quoted(r.note) + '\n';
    w.flush_if_full();
  }
  w.close();
}

void export_weight_table_csv(const WeightSet& ws, const std::filesystem::path& path) {
  const Grid& g = ws.grid();
  Writer w(path);
  std::string& b = w.buffer();
  b += "t,a,x,theta,psi,phi,exp_2s_phi\n";
  for (int n = 1; n < g.Nt(); ++n)
    for (int j = 0; j < g.age_layers(); ++j) {
      const double th = theta(g.t(n), g.a(j), g.T());
      for (int i = 0; i < g.space_nodes(); ++i) {
        const double ps = ws.psi_node(i);
        for (double v : {g.t(n), g.a(j), g.x(i), th, ps, th * ps}) {
          append(b, v);
          b += ',';
        }
        append(b, exp_weight(2.0 * ws.s() * th * ps));
        b += '\n';
        w.flush_if_full();
      }
    }
  w.close();
}

void export_table_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
                      const std::filesystem::path& path) {
  Writer w(path);
  std::string& b = w.buffer();
  for (std::size_t c = 0; c < header.size(); ++c) b += (c ? "," : "") + header[c];
  b += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw ShapeError("table csv: row width differs from the header");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) b += ',';
      append(b, row[c]);
    }
    b += '\n';
    w.flush_if_full();
  }
  w.close();
}

}  // namespace degpop::io
