#include "peakforge/cli/signal_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "peakforge/error.hpp"

namespace peakforge::cli {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

bool parse_double(const std::string& text, double& value) {
  if (text.empty()) return false;
  const char* begin = text.data();
  if (*begin == '+') ++begin;
  const char* end = text.data() + text.size();
  const auto result = std::from_chars(begin, end, value);
  return result.ec == std::errc() && result.ptr == end;
}

std::string where(const std::string& source, int line) {
  return source + ":" + std::to_string(line) + ": ";
}

}  // namespace

void validate_record(const SignalRecord& record) {
  detail::require(record.x.size() == record.y.size(), "x and y must have equal length");
  detail::require(record.x.allFinite() && record.y.allFinite(), "series values must be finite");
  for (Eigen::Index i = 1; i < record.x.size(); ++i) {
    detail::require(record.x[i] > record.x[i - 1], "x must be strictly increasing");
  }
}

SignalRecord parse_csv(std::istream& in, const std::string& source, int min_rows) {
  SignalRecord record;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<int> lines;
  std::string line;
  int number = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text[0] == '#') {
      const auto body = trim(std::string_view(text).substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) {
        record.metadata.emplace_back(trim(std::string_view(body).substr(0, eq)),
                                     trim(std::string_view(body).substr(eq + 1)));
      }
      continue;
    }
    const auto fields = split(text, ',');
    double x = 0.0;
    double y = 0.0;
    const bool numeric = fields.size() >= 2 && parse_double(fields[0], x) && parse_double(fields[1], y);
    if (!numeric) {
      if (first_content) {
        first_content = false;
        continue;  // header
      }
      throw ValidationError(where(source, number) + "expected two numeric columns");
    }
    first_content = false;
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw ValidationError(where(source, number) + "non-finite value");
    }
    if (!xs.empty() && x <= xs.back()) {
      throw ValidationError(where(source, number) + "x is not strictly increasing (previous value on line " +
                            std::to_string(lines.back()) + ")");
    }
    xs.push_back(x);
    ys.push_back(y);
    lines.push_back(number);
  }
  if (static_cast<int>(xs.size()) < min_rows) {
    throw ValidationError(source + ": need at least " + std::to_string(min_rows) +
                          " data rows, found " + std::to_string(xs.size()));
  }
  record.x = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  record.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return record;
}

SignalRecord ingest_csv(const std::filesystem::path& path, int min_rows) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  return parse_csv(in, path.string(), min_rows);
}

std::string format_number(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::string format_record(const SignalRecord& record) {
  validate_record(record);
  std::string out;
  for (const auto& [key, value] : record.metadata) out += "# " + key + "=" + value + "\n";
  out += "x,y\n";
  for (Eigen::Index i = 0; i < record.x.size(); ++i) {
    out += format_number(record.x[i]) + "," + format_number(record.y[i]) + "\n";
  }
  return out;
}

std::string format_table(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    out += (c ? "," : "") + table.columns[c];
  }
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_number(row[c]);
    out += "\n";
  }
  return out;
}

std::string format_key_values(const KeyValues& values) {
  std::string out;
  for (const auto& [key, value] : values) out += key + "=" + value + "\n";
  return out;
}

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError(where(source, number) + "expected key=value");
    }
    out.emplace_back(trim(std::string_view(text).substr(0, eq)),
                     trim(std::string_view(text).substr(eq + 1)));
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + temp.string());
    out << content;
    out.flush();
    if (!out) throw ValidationError("failed writing " + temp.string());
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::filesystem::remove(temp);
    throw ValidationError("cannot move " + temp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace peakforge::cli
