// Deterministic text output: '.' decimal separator, '\n' line endings, one
// header row, doubles printed with %.17g so reruns are byte-identical.
#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace sbl {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvBuilder {
 public:
  explicit CsvBuilder(const std::vector<std::string>& header) {
    append_row_text(header);
  }
  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(fmt_double(v));
    append_row_text(cells);
  }
  void row_text(const std::vector<std::string>& cells) { append_row_text(cells); }
  const std::string& str() const { return out_; }

 private:
  void append_row_text(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';
  }
  std::string out_;
};

}  // namespace sbl
