#include "oodlab/csv.hpp"

#include <cstdio>
#include <fstream>

namespace oodlab::csv {

std::vector<std::vector<std::string>> read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    rows.push_back(std::move(fields));
  }
  return rows;
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string& f = row[i];
      if (f.find_first_of(",\"\n\r") != std::string::npos) {
        throw DataError("csv: field '" + f + "' needs quoting, which this format does not allow");
      }
      if (i) out << ',';
      out << f;
    }
    out << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

std::string format_double(double v) {
  // %.17g always round-trips but is noisy; try %.12g first and fall back.
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(context + ": bad numeric value '" + s + "'");
  }
}

}  // namespace oodlab::csv
