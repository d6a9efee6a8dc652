#pragma once

// On-disk form of a binary data matrix, split across four small files in a
// directory: matrix.tsv (sparse ones), bin_centers.tsv, coords.tsv and
// matrix.meta (name and bin grid). The writer is canonical so identical
// matrices always serialize to identical bytes.

#include <filesystem>
#include <string>
#include <vector>

#include "dipps/binning.hpp"
#include "dipps/error.hpp"
#include "dipps/peaklist_io.hpp"
#include "dipps/text.hpp"
#include "dipps/types.hpp"

namespace dipps {

inline void write_matrix(const std::filesystem::path& dir, const BinaryDataMatrix& m) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::size_t d = m.values.rows();
  const std::size_t n = m.values.cols();
  if (m.bin_centers.size() != d || m.coords.size() != n)
    throw ContractViolation("matrix fields disagree on dimensions");

  {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({std::to_string(d), std::to_string(n)});
    for (std::size_t i = 0; i < d; ++i)
      m.values.for_each_set_in_row(i, [&](std::size_t j) {
        rows.push_back({std::to_string(i), std::to_string(j)});
      });
    write_table(dir / "matrix.tsv", TableSchema{{"bin_index", "spectrum_index"}, '\t'},
                rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(d);
    for (double c : m.bin_centers) rows.push_back({format_double(c)});
    write_table(dir / "bin_centers.tsv", TableSchema{{"center"}, '\t'}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(n);
    for (const GridPoint& p : m.coords)
      rows.push_back({std::to_string(p.x), std::to_string(p.y)});
    write_table(dir / "coords.tsv", TableSchema{{"x", "y"}, '\t'}, rows);
  }
  {
    std::ofstream out(dir / "matrix.meta");
    if (!out) throw IoError("cannot open " + (dir / "matrix.meta").string());
    out << "name=" << m.source << "\n";
    out << "width=" << format_double(m.bin_width) << "\n";
    out << "offset=" << format_double(m.bin_offset) << "\n";
    if (!out) throw IoError("write failed: " + (dir / "matrix.meta").string());
  }
}

inline BinaryDataMatrix read_matrix(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  BinaryDataMatrix m;

  {
    const fs::path p = dir / "matrix.meta";
    auto kv = io_detail::read_key_values(p, {"name", "width", "offset"});
    for (const char* req : {"name", "width", "offset"})
      if (!kv.contains(req))
        throw ParseError(p.filename().string(), 0,
                         std::string("missing required key \"") + req + "\"");
    m.source = kv.at("name");
    auto w = parse_double(kv.at("width"));
    auto o = parse_double(kv.at("offset"));
    if (!w || !o)
      throw ParseError(p.filename().string(), 0, "width/offset must be numeric");
    m.bin_width = *w;
    m.bin_offset = *o;
  }

  {
    const fs::path p = dir / "bin_centers.tsv";
    auto lines = io_detail::read_lines(p);
    if (lines.empty()) throw ParseError(p.filename().string(), 1, "empty file");
    io_detail::require_header(p, lines[0], "center");
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
      auto v = parse_double(lines[ln]);
      if (!v) throw ParseError(p.filename().string(), ln + 1, "bad bin center");
      m.bin_centers.push_back(*v);
    }
  }

  {
    const fs::path p = dir / "coords.tsv";
    auto lines = io_detail::read_lines(p);
    if (lines.empty()) throw ParseError(p.filename().string(), 1, "empty file");
    io_detail::require_header(p, lines[0], "x\ty");
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
      auto f = split(lines[ln], '\t');
      if (f.size() != 2)
        throw ParseError(p.filename().string(), ln + 1, "expected 2 fields");
      auto x = parse_int(f[0]);
      auto y = parse_int(f[1]);
      if (!x || !y)
        throw ParseError(p.filename().string(), ln + 1, "coordinates must be integers");
      m.coords.push_back(GridPoint{static_cast<int>(*x), static_cast<int>(*y)});
    }
  }

  {
    const fs::path p = dir / "matrix.tsv";
    auto lines = io_detail::read_lines(p);
    if (lines.empty()) throw ParseError(p.filename().string(), 1, "empty file");
    io_detail::require_header(p, lines[0], "bin_index\tspectrum_index");
    if (lines.size() < 2)
      throw ParseError(p.filename().string(), 1, "missing dimension line");
    auto dims = split(lines[1], '\t');
    if (dims.size() != 2) throw ParseError(p.filename().string(), 2, "expected 2 fields");
    auto d = parse_int(dims[0]);
    auto n = parse_int(dims[1]);
    if (!d || !n || *d < 0 || *n < 0)
      throw ParseError(p.filename().string(), 2,
                       "dimensions must be non-negative integers");
    if (static_cast<std::size_t>(*d) != m.bin_centers.size())
      throw ValidationError(p.string() + ": row count disagrees with bin_centers.tsv");
    if (static_cast<std::size_t>(*n) != m.coords.size())
      throw ValidationError(p.string() + ": column count disagrees with coords.tsv");
    m.values = BitMatrix(static_cast<std::size_t>(*d), static_cast<std::size_t>(*n));
    for (std::size_t ln = 2; ln < lines.size(); ++ln) {
      auto f = split(lines[ln], '\t');
      if (f.size() != 2)
        throw ParseError(p.filename().string(), ln + 1, "expected 2 fields");
      auto i = parse_int(f[0]);
      auto j = parse_int(f[1]);
      if (!i || !j)
        throw ParseError(p.filename().string(), ln + 1, "indices must be integers");
      if (*i < 0 || *i >= *d || *j < 0 || *j >= *n)
        throw ParseError(p.filename().string(), ln + 1, "index out of range");
      m.values.set(static_cast<std::size_t>(*i), static_cast<std::size_t>(*j), true);
    }
  }
  return m;
}

}  // namespace dipps
