#ifndef PCACOMP_IO_HPP
#define PCACOMP_IO_HPP

#include "common.hpp"
#include "data_matrix.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace pcacomp {

enum class ParseErrorKind {
  Io,
  Empty,
  BadHeader,
  DimensionMismatch,
  NonNumeric,
  DuplicateCoordinate,
  OutOfRange,
  NegativeEntry,
};

inline const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::Io: return "io";
    case ParseErrorKind::Empty: return "empty";
    case ParseErrorKind::BadHeader: return "bad-header";
    case ParseErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ParseErrorKind::NonNumeric: return "non-numeric";
    case ParseErrorKind::DuplicateCoordinate: return "duplicate-coordinate";
    case ParseErrorKind::OutOfRange: return "out-of-range";
    case ParseErrorKind::NegativeEntry: return "negative-entry";
  }
  return "unknown";
}

/// Input file rejected; `line` is 1-based, 0 when the problem is not tied to a line.
class ParseError : public InputError {
 public:
  ParseError(ParseErrorKind kind, std::size_t line, const std::string& what)
      : InputError(format(kind, line, what)), kind_(kind), line_(line) {}

  ParseErrorKind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  static std::string format(ParseErrorKind kind, std::size_t line, const std::string& what) {
    std::string s = std::string(to_string(kind)) + " error";
    if (line > 0) s += " at line " + std::to_string(line);
    return s + ": " + what;
  }

  ParseErrorKind kind_;
  std::size_t line_;
};

enum class MatrixFormat { MatrixMarket, DenseCsv, Auto };

struct IngestSpec {
  std::string matrix_path;
  MatrixFormat format = MatrixFormat::Auto;
  /// Rows are features (d x n). When false the file holds samples as rows.
  bool rows_are_features = true;
  std::optional<std::string> labels_path;
  bool log1p = false;
};

namespace detail {

/// Line reader over plain or gzip-compressed files (zlib reads both).
class LineReader {
 public:
  explicit LineReader(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
    if (!file_) throw ParseError(ParseErrorKind::Io, 0, "cannot open '" + path + "'");
  }
  ~LineReader() {
    if (file_) gzclose(file_);
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buffer[1 << 16];
    bool got = false;
    while (gzgets(file_, buffer, sizeof(buffer)) != nullptr) {
      got = true;
      line.append(buffer);
      if (!line.empty() && line.back() == '\n') break;
    }
    if (!got) return false;
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    ++number_;
    return true;
  }

  std::size_t line_number() const { return number_; }

 private:
  gzFile file_;
  std::size_t number_ = 0;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_integer(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::vector<std::string_view> split_char(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline SparseMatrix read_matrix_market(const std::string& path) {
  LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw ParseError(ParseErrorKind::Empty, 0, "'" + path + "' is empty");
  const auto header = split_whitespace(line);
  if (header.size() < 5 || header[0] != "%%MatrixMarket" || lower(header[1]) != "matrix")
    throw ParseError(ParseErrorKind::BadHeader, 1, "expected '%%MatrixMarket matrix coordinate real general'");
  const auto layout = lower(header[2]);
  const auto field = lower(header[3]);
  const auto symmetry = lower(header[4]);
  if (layout != "coordinate") throw ParseError(ParseErrorKind::BadHeader, 1, "only coordinate layout is supported");
  if (field != "real" && field != "integer" && field != "pattern")
    throw ParseError(ParseErrorKind::BadHeader, 1, "unsupported field type '" + field + "'");
  if (symmetry != "general") throw ParseError(ParseErrorKind::BadHeader, 1, "only general symmetry is supported");
  const bool pattern = field == "pattern";

  long long rows = -1, cols = -1, nnz = -1;
  while (reader.next(line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '%') continue;
    const auto f = split_whitespace(t);
    if (f.size() != 3) throw ParseError(ParseErrorKind::BadHeader, reader.line_number(), "size line needs 'rows cols entries'");
    const auto r = parse_integer(f[0]), c = parse_integer(f[1]), z = parse_integer(f[2]);
    if (!r || !c || !z || *r < 0 || *c < 0 || *z < 0)
      throw ParseError(ParseErrorKind::NonNumeric, reader.line_number(), "size line must hold three non-negative integers");
    rows = *r;
    cols = *c;
    nnz = *z;
    break;
  }
  if (rows < 0) throw ParseError(ParseErrorKind::Empty, reader.line_number(), "no size line in '" + path + "'");

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<std::size_t> lines;
  triplets.reserve(static_cast<std::size_t>(nnz));
  lines.reserve(static_cast<std::size_t>(nnz));
  while (reader.next(line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '%') continue;
    const auto f = split_whitespace(t);
    const std::size_t expected = pattern ? 2 : 3;
    if (f.size() != expected)
      throw ParseError(ParseErrorKind::DimensionMismatch, reader.line_number(),
                       "entry needs " + std::to_string(expected) + " fields, found " + std::to_string(f.size()));
    const auto r = parse_integer(f[0]), c = parse_integer(f[1]);
    if (!r || !c) throw ParseError(ParseErrorKind::NonNumeric, reader.line_number(), "coordinate is not an integer");
    if (*r < 1 || *r > rows || *c < 1 || *c > cols)
      throw ParseError(ParseErrorKind::OutOfRange, reader.line_number(),
                       "coordinate (" + std::to_string(*r) + ", " + std::to_string(*c) + ") outside " +
                           std::to_string(rows) + " x " + std::to_string(cols));
    double v = 1.0;
    if (!pattern) {
      const auto parsed = parse_double(f[2]);
      if (!parsed) throw ParseError(ParseErrorKind::NonNumeric, reader.line_number(), "value '" + std::string(f[2]) + "' is not numeric");
      v = *parsed;
    }
    if (static_cast<long long>(triplets.size()) >= nnz)
      throw ParseError(ParseErrorKind::DimensionMismatch, reader.line_number(),
                       "more entries than the declared " + std::to_string(nnz));
    triplets.emplace_back(static_cast<int>(*r - 1), static_cast<int>(*c - 1), v);
    lines.push_back(reader.line_number());
  }
  if (static_cast<long long>(triplets.size()) != nnz)
    throw ParseError(ParseErrorKind::DimensionMismatch, reader.line_number(),
                     "declared " + std::to_string(nnz) + " entries, found " + std::to_string(triplets.size()));

  std::vector<std::size_t> order(triplets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(triplets[a].col(), triplets[a].row(), lines[a]) < std::tie(triplets[b].col(), triplets[b].row(), lines[b]);
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const auto& a = triplets[order[i - 1]];
    const auto& b = triplets[order[i]];
    if (a.row() == b.row() && a.col() == b.col())
      throw ParseError(ParseErrorKind::DuplicateCoordinate, lines[order[i]],
                       "coordinate (" + std::to_string(b.row() + 1) + ", " + std::to_string(b.col() + 1) +
                           ") already given at line " + std::to_string(lines[order[i - 1]]));
  }
  SparseMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

inline Matrix read_dense_csv(const std::string& path) {
  LineReader reader(path);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::optional<std::size_t> width;
  bool first_content = true;
  bool row_names = false;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    auto fields = split_char(line, ',');
    if (first_content) {
      first_content = false;
      const bool header = std::any_of(fields.begin() + 1, fields.end(), [](auto f) { return !parse_double(f); }) ||
                          (fields.size() == 1 && !parse_double(fields[0]));
      if (header) {
        width = fields.size();
        continue;
      }
    }
    if (rows.empty() && !parse_double(fields[0]) && fields.size() > 1) row_names = true;
    if (width && *width != fields.size() && !(row_names && *width + 1 == fields.size()) &&
        !(rows.empty() && row_names))
      throw ParseError(ParseErrorKind::DimensionMismatch, reader.line_number(),
                       "expected " + std::to_string(*width) + " fields, found " + std::to_string(fields.size()));
    if (row_names) fields.erase(fields.begin());
    if (!rows.empty() && fields.size() != rows.front().size())
      throw ParseError(ParseErrorKind::DimensionMismatch, reader.line_number(),
                       "expected " + std::to_string(rows.front().size()) + " values, found " + std::to_string(fields.size()));
    std::vector<double> values;
    values.reserve(fields.size());
    for (auto f : fields) {
      const auto v = parse_double(f);
      if (!v) throw ParseError(ParseErrorKind::NonNumeric, reader.line_number(), "value '" + std::string(trim(f)) + "' is not numeric");
      values.push_back(*v);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError(ParseErrorKind::Empty, reader.line_number(), "'" + path + "' holds no numeric rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return m;
}

}  // namespace detail

inline MatrixFormat detect_format(const std::string& path) {
  std::string p = detail::lower(path);
  if (detail::ends_with(p, ".gz")) p.resize(p.size() - 3);
  if (detail::ends_with(p, ".mtx") || detail::ends_with(p, ".mm")) return MatrixFormat::MatrixMarket;
  if (detail::ends_with(p, ".csv") || detail::ends_with(p, ".txt")) return MatrixFormat::DenseCsv;
  throw InputError("cannot infer the matrix format of '" + path + "'; pass it explicitly");
}

/// Labels as newline-delimited strings, or a two-column "id,label" CSV (second
/// column used). Ids are dense in first-appearance order.
inline Labels load_labels(const std::string& path) {
  detail::LineReader reader(path);
  std::string line;
  std::vector<int> ids;
  std::vector<std::string> names;
  std::unordered_map<std::string, int> lookup;
  bool first = true;
  while (reader.next(line)) {
    auto t = detail::trim(line);
    if (t.empty()) continue;
    std::string_view label = t;
    const auto fields = detail::split_char(t, ',');
    if (fields.size() == 2) {
      label = detail::trim(fields[1]);
      if (first) {
        first = false;
        const auto name = detail::lower(label);
        if (name == "label" || name == "cluster" || name == "type" || name == "celltype") continue;
      }
    } else if (fields.size() > 2) {
      throw ParseError(ParseErrorKind::DimensionMismatch, reader.line_number(), "label lines hold one or two fields");
    }
    first = false;
    auto [it, inserted] = lookup.emplace(std::string(label), static_cast<int>(names.size()));
    if (inserted) names.emplace_back(label);
    ids.push_back(it->second);
  }
  if (ids.empty()) throw ParseError(ParseErrorKind::Empty, 0, "'" + path + "' holds no labels");
  const int k = static_cast<int>(names.size());
  return Labels(std::move(ids), k, std::move(names));
}

inline DataMatrix log_normalize(const DataMatrix& a);

/// Loads a matrix and optional labels. Sparse input stays sparse.
inline DataMatrix load_matrix(const IngestSpec& spec) {
  const MatrixFormat format = spec.format == MatrixFormat::Auto ? detect_format(spec.matrix_path) : spec.format;
  std::optional<Labels> labels;
  if (spec.labels_path) labels = load_labels(*spec.labels_path);
  auto attach = [&](auto values) {
    if (labels && static_cast<Index>(labels->size()) != values.cols())
      throw ParseError(ParseErrorKind::DimensionMismatch, 0,
                       "label count " + std::to_string(labels->size()) + " does not match sample count " +
                           std::to_string(values.cols()));
    if (values.rows() < 1 || values.cols() < 2)
      throw ParseError(ParseErrorKind::DimensionMismatch, 0, "matrix must have at least one feature and two samples");
    return DataMatrix(std::move(values), labels);
  };
  if (format == MatrixFormat::MatrixMarket) {
    SparseMatrix m = detail::read_matrix_market(spec.matrix_path);
    if (!spec.rows_are_features) m = SparseMatrix(m.transpose());
    DataMatrix out = attach(std::move(m));
    return spec.log1p ? log_normalize(out) : out;
  }
  Matrix m = detail::read_dense_csv(spec.matrix_path);
  if (!spec.rows_are_features) m.transposeInPlace();
  DataMatrix out = attach(std::move(m));
  return spec.log1p ? log_normalize(out) : out;
}

/// Elementwise natural log(1 + x); zeros stay zero and sparse stays sparse.
inline DataMatrix log_normalize(const DataMatrix& a) {
  if (a.log_normalized()) throw InputError("matrix is already log-normalized");
  auto fail = [](Index r, Index c, double v) {
    std::ostringstream msg;
    msg << "entry (" << r + 1 << ", " << c + 1 << ") = " << v << " is negative; log1p needs x >= 0";
    throw ParseError(ParseErrorKind::NegativeEntry, 0, msg.str());
  };
  if (a.is_sparse()) {
    SparseMatrix m = a.sparse();
    for (Index c = 0; c < m.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
        if (it.value() < 0.0) fail(it.row(), it.col(), it.value());
        it.valueRef() = std::log1p(it.value());
      }
    return DataMatrix(std::move(m), a.labels()).marked_log_normalized();
  }
  Matrix m = a.dense();
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r) {
      if (m(r, c) < 0.0) fail(r, c, m(r, c));
      m(r, c) = std::log1p(m(r, c));
    }
  return DataMatrix(std::move(m), a.labels()).marked_log_normalized();
}

namespace detail {

/// Output file, gzip-compressed when the path ends in ".gz".
class LineWriter {
 public:
  explicit LineWriter(const std::string& path) : gz_(ends_with(path, ".gz")) {
    if (gz_) {
      gzfile_ = gzopen(path.c_str(), "wb");
      if (!gzfile_) throw ParseError(ParseErrorKind::Io, 0, "cannot write '" + path + "'");
    } else {
      file_ = std::fopen(path.c_str(), "wb");
      if (!file_) throw ParseError(ParseErrorKind::Io, 0, "cannot write '" + path + "'");
    }
  }
  ~LineWriter() {
    if (gzfile_) gzclose(gzfile_);
    if (file_) std::fclose(file_);
  }
  LineWriter(const LineWriter&) = delete;
  LineWriter& operator=(const LineWriter&) = delete;

  void write(std::string_view s) {
    if (gz_)
      gzwrite(gzfile_, s.data(), static_cast<unsigned>(s.size()));
    else
      std::fwrite(s.data(), 1, s.size(), file_);
  }

 private:
  bool gz_;
  gzFile gzfile_ = nullptr;
  std::FILE* file_ = nullptr;
};

inline std::string format_exact(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Writes a coordinate matrix-market file; shortest round-trip formatting keeps values bit-exact.
inline void write_matrix_market(const std::string& path, const DataMatrix& a) {
  const SparseMatrix m = a.to_sparse();
  detail::LineWriter out(path);
  out.write("%%MatrixMarket matrix coordinate real general\n");
  out.write(std::to_string(m.rows()) + " " + std::to_string(m.cols()) + " " + std::to_string(m.nonZeros()) + "\n");
  std::string line;
  for (Index c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
      line = std::to_string(it.row() + 1) + " " + std::to_string(it.col() + 1) + " " + detail::format_exact(it.value()) + "\n";
      out.write(line);
    }
}

inline void write_dense_csv(const std::string& path, const DataMatrix& a) {
  const Matrix m = a.to_dense();
  detail::LineWriter out(path);
  std::string line;
  for (Index r = 0; r < m.rows(); ++r) {
    line.clear();
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) line += ',';
      line += detail::format_exact(m(r, c));
    }
    line += '\n';
    out.write(line);
  }
}

/// One label per line (external names when present, else C1..Ck).
inline void write_labels(const std::string& path, const Labels& labels) {
  detail::LineWriter out(path);
  for (int id : labels.ids) out.write(labels.name(id) + "\n");
}

}  // namespace pcacomp

#endif
