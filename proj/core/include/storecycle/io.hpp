#pragma once

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "storecycle/calibration.hpp"

namespace storecycle::io {

/// Shortest-safe text form of a double: 17 significant digits.
std::string format_double(double v);

/// Parses a full decimal number; throws InputError naming `what` otherwise.
double parse_double(const std::string& text, const std::string& what);

/// Cash-flow CSV with header `date,cash_flow`. Rows with an empty value are
/// treated as missing days. Errors name the source and the 1-based row number
/// (the header is row 1).
std::vector<calibration::RawObservation> read_cash_flow_csv(std::istream& in,
                                                            const std::string& source = "<input>");
std::vector<calibration::RawObservation> read_cash_flow_csv_file(const std::string& path);

void write_cash_flow_csv(std::ostream& out, const calibration::CashFlowSeries& series);

/// Numeric CSV with one header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table_csv(std::istream& in, const std::string& source = "<input>");
void write_table_csv(std::ostream& out, const Table& table);

/// Writes to `path`, or standard output when path is "-".
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& doc);

}  // namespace storecycle::io
