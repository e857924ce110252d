#include "io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace enz::io {

namespace {

bool parse_field(std::string_view field, double& out) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const char* first = field.data();
  const char* last = first + field.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ',' || line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == ';'))
      ++i;
    const std::size_t start = i;
    while (i < line.size() && !(line[i] == ',' || line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == ';'))
      ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::vector<double>> read_numeric_table(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    const auto fields = split_fields(view);
    if (fields.empty()) continue;
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (auto f : fields) {
      double v = 0.0;
      if (!parse_field(f, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (header_allowed) {
        header_allowed = false;
        continue;
      }
      throw Error(Errc::Parse, "non-numeric field on line " + std::to_string(line_no));
    }
    header_allowed = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::vector<double>> read_numeric_table_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::Io, ("cannot open " + path).c_str());
  return read_numeric_table(in);
}

Vector flatten(const std::vector<std::vector<double>>& table) {
  std::size_t total = 0;
  for (const auto& r : table) total += r.size();
  Vector out(static_cast<Index>(total));
  Index i = 0;
  for (const auto& r : table)
    for (double v : r) out(i++) = v;
  return out;
}

Matrix to_matrix(const std::vector<std::vector<double>>& table) {
  require(!table.empty(), Errc::Parse, "matrix table is empty");
  const std::size_t cols = table.front().size();
  Matrix out(static_cast<Index>(table.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < table.size(); ++i) {
    require(table[i].size() == cols, Errc::Parse, "matrix rows have different lengths");
    for (std::size_t j = 0; j < cols; ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = table[i][j];
  }
  return out;
}

}  // namespace enz::io
