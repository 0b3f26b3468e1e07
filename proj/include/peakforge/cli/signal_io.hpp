#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace peakforge::cli {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Observed series plus free-form metadata ("# key=value" lines in CSV form).
struct SignalRecord {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  KeyValues metadata;
};

/// Equal lengths, finite values, strictly increasing x.
void validate_record(const SignalRecord& record);

/// Two-column x,y CSV with an optional header line; extra columns are
/// ignored. Errors name the offending line.
SignalRecord parse_csv(std::istream& in, const std::string& source, int min_rows = 10);
SignalRecord ingest_csv(const std::filesystem::path& path, int min_rows = 10);

std::string format_record(const SignalRecord& record);

/// Shortest text that reads back to the same double.
std::string format_number(double value);

/// Named numeric columns, written as CSV.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::string format_table(const Table& table);

std::string format_key_values(const KeyValues& values);

/// key=value lines; blank lines and '#' comments are skipped.
KeyValues parse_key_values(std::istream& in, const std::string& source);

/// Writes to a temporary sibling, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace peakforge::cli
