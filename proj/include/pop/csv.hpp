#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "pop/common.hpp"

namespace pop {

// Plain CSV, no quoting (writers never emit commas inside cells). Doubles go
// through fmt17 so files are bytewise reproducible and round-trip exactly.
// An optional schema tag goes out as a leading comment line; readers skip
// any line starting with '#'.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& cols,
            const std::string& schema = "")
      : f_(path, std::ios::binary), ncols_(cols.size()) {
    if (!f_) fail("cannot write csv: " + path);
    if (!schema.empty()) f_ << "# schema: " << schema << '\n';
    write_row(cols);
  }

  void row(const std::vector<std::string>& cells) {
    POP_CHECK(cells.size() == ncols_, "csv row width mismatch");
    write_row(cells);
  }

  static std::string cell(double x) { return fmt17(x); }
  static std::string cell(i64 x) { return std::to_string(x); }

  void flush() { f_.flush(); }

 private:
  void write_row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); i++) {
      if (i) f_ << ',';
      f_ << cells[i];
    }
    f_ << '\n';
  }

  std::ofstream f_;
  size_t ncols_;
};

class CsvTable {
 public:
  static CsvTable load(const std::string& path) {
    CsvTable t;
    std::string text = slurp(path);
    bool first = true;
    for (const auto& line : split(text, '\n')) {
      if (line.empty() || line[0] == '#') continue;
      auto cells = split(line, ',');
      if (first) {
        t.cols_ = cells;
        first = false;
      } else {
        POP_CHECK(cells.size() == t.cols_.size(), "ragged csv: " + path);
        t.rows_.push_back(cells);
      }
    }
    return t;
  }

  size_t nrows() const { return rows_.size(); }
  const std::vector<std::string>& columns() const { return cols_; }

  size_t col(const std::string& name) const {
    for (size_t i = 0; i < cols_.size(); i++)
      if (cols_[i] == name) return i;
    fail("csv column not found: " + name);
  }

  const std::string& at(size_t row, const std::string& name) const {
    return rows_.at(row)[col(name)];
  }

  double f64(size_t row, const std::string& name) const { return parse_f64(at(row, name)); }
  i64 i64_(size_t row, const std::string& name) const { return parse_i64(at(row, name)); }

 private:
  std::vector<std::string> cols_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace pop
