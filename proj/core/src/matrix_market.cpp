#include "kktsolve/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kktsolve/error.hpp"

namespace kktsolve {

namespace {

struct Header {
  bool coordinate = true;
  bool symmetric = false;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw Error("matrix market: cannot open " + path.string());
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path_.string() + ":" + std::to_string(line_no_) + ": " + msg);
  }

  bool next_raw(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  // Next line that is neither blank nor a comment.
  bool next_data(std::string& line) {
    while (next_raw(line)) {
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '%') continue;
      return true;
    }
    return false;
  }

  Header header() {
    std::string line;
    if (!next_raw(line)) fail("empty file");
    std::istringstream ss(line);
    std::string banner, object, format, field, symmetry;
    ss >> banner >> object >> format >> field >> symmetry;
    auto lower = [](std::string s) {
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      return s;
    };
    if (banner != "%%MatrixMarket") fail("missing %%MatrixMarket banner");
    if (lower(object) != "matrix") fail("unsupported object '" + object + "'");
    Header h;
    format = lower(format);
    if (format == "array") {
      h.coordinate = false;
    } else if (format != "coordinate") {
      fail("unsupported format '" + format + "'");
    }
    field = lower(field);
    if (field != "real" && field != "integer" && field != "double") fail("unsupported field '" + field + "', expected real");
    symmetry = lower(symmetry);
    if (symmetry == "symmetric") {
      h.symmetric = true;
    } else if (symmetry != "general") {
      fail("unsupported symmetry '" + symmetry + "'");
    }
    return h;
  }

  std::vector<long long> integers(const std::string& line, std::size_t count) {
    std::vector<long long> out;
    const char* p = line.c_str();
    for (std::size_t i = 0; i < count; ++i) {
      char* end = nullptr;
      errno = 0;
      const long long v = std::strtoll(p, &end, 10);
      if (end == p) fail("expected " + std::to_string(count) + " integers");
      if (errno == ERANGE) fail("integer overflow");
      out.push_back(v);
      p = end;
    }
    return out;
  }

  double real(const char*& p) {
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p) fail("expected a real value");
    p = end;
    return v;
  }

  long long index(const char*& p) {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(p, &end, 10);
    if (end == p) fail("expected an index");
    if (errno == ERANGE) fail("index overflow");
    p = end;
    return v;
  }

  static void expect_end(const char* p, Reader& r) {
    while (*p == ' ' || *p == '\t') ++p;
    if (*p != '\0') r.fail("trailing characters on entry line");
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  long line_no_ = 0;
};

void write_or_throw(std::FILE* f, const std::filesystem::path& path) {
  if (!f) throw Error("matrix market: cannot write " + path.string());
}

}  // namespace

CsMatrix load_matrix_market(const std::filesystem::path& path) {
  Reader r(path);
  const Header h = r.header();
  if (!h.coordinate) r.fail("matrix files must use coordinate format");
  std::string line;
  if (!r.next_data(line)) r.fail("missing size line");
  const auto dims = r.integers(line, 3);
  if (dims[0] < 0 || dims[1] < 0 || dims[2] < 0) r.fail("negative size");
  if (h.symmetric && dims[0] != dims[1]) r.fail("symmetric matrix must be square");
  Triplets t(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
  t.entries.reserve(static_cast<std::size_t>(dims[2]));
  for (long long e = 0; e < dims[2]; ++e) {
    if (!r.next_data(line)) r.fail("expected " + std::to_string(dims[2]) + " entries, found " + std::to_string(e));
    const char* p = line.c_str();
    const long long i = r.index(p);
    const long long j = r.index(p);
    const double v = r.real(p);
    Reader::expect_end(p, r);
    if (i < 1 || i > dims[0] || j < 1 || j > dims[1]) r.fail("index out of range");
    Index row = static_cast<Index>(i - 1);
    Index col = static_cast<Index>(j - 1);
    if (h.symmetric && col > row) std::swap(row, col);
    t.add(row, col, v);
  }
  if (r.next_data(line)) r.fail("more entries than declared");
  return from_triplets(t, h.symmetric ? Symmetry::symmetric_lower : Symmetry::general);
}

void write_matrix_market(const std::filesystem::path& path, const CsMatrix& a) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  write_or_throw(f, path);
  std::fprintf(f, "%%%%MatrixMarket matrix coordinate real %s\n", a.is_symmetric_lower() ? "symmetric" : "general");
  std::fprintf(f, "%td %td %td\n", a.rows(), a.cols(), a.nnz());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = rp[static_cast<std::size_t>(i)]; p < rp[static_cast<std::size_t>(i) + 1]; ++p) {
      std::fprintf(f, "%td %td %.17g\n", i + 1, ci[static_cast<std::size_t>(p)] + 1, v[static_cast<std::size_t>(p)]);
    }
  }
  const bool ok = std::ferror(f) == 0;
  std::fclose(f);
  if (!ok) throw Error("matrix market: write failed for " + path.string());
}

Vector load_vector_market(const std::filesystem::path& path) {
  Reader r(path);
  const Header h = r.header();
  std::string line;
  if (!r.next_data(line)) r.fail("missing size line");
  if (h.coordinate) {
    const auto dims = r.integers(line, 3);
    if (dims[0] < 0 || dims[1] != 1 || dims[2] < 0) r.fail("vector file must have exactly one column");
    Vector v(static_cast<std::size_t>(dims[0]), 0.0);
    for (long long e = 0; e < dims[2]; ++e) {
      if (!r.next_data(line)) r.fail("fewer entries than declared");
      const char* p = line.c_str();
      const long long i = r.index(p);
      const long long j = r.index(p);
      const double x = r.real(p);
      Reader::expect_end(p, r);
      if (i < 1 || i > dims[0] || j != 1) r.fail("index out of range");
      v[static_cast<std::size_t>(i - 1)] += x;
    }
    return v;
  }
  const auto dims = r.integers(line, 2);
  if (dims[0] < 0 || dims[1] != 1) r.fail("vector file must have exactly one column");
  Vector v(static_cast<std::size_t>(dims[0]));
  for (auto& x : v) {
    if (!r.next_data(line)) r.fail("fewer values than declared");
    const char* p = line.c_str();
    x = r.real(p);
    Reader::expect_end(p, r);
  }
  if (r.next_data(line)) r.fail("more values than declared");
  return v;
}

void write_vector_market(const std::filesystem::path& path, std::span<const double> v) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  write_or_throw(f, path);
  std::fprintf(f, "%%%%MatrixMarket matrix array real general\n%zu 1\n", v.size());
  for (double x : v) std::fprintf(f, "%.17g\n", x);
  const bool ok = std::ferror(f) == 0;
  std::fclose(f);
  if (!ok) throw Error("matrix market: write failed for " + path.string());
}

}  // namespace kktsolve
