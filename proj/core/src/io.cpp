#include "storecycle/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "storecycle/errors.hpp"

namespace storecycle::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string row_prefix(const std::string& source, std::size_t row) {
  return source + ": row " + std::to_string(row) + ": ";
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  if (s.empty()) throw InputError(what + ": empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v)))
    throw InputError(what + ": '" + s + "' is not a valid number");
  return v;
}

std::vector<calibration::RawObservation> read_cash_flow_csv(std::istream& in,
                                                            const std::string& source) {
  std::string line;
  std::size_t row = 0;
  bool header = false;
  std::vector<calibration::RawObservation> out;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (!header) {
      if (cells.size() != 2 || cells[0] != "date" || cells[1] != "cash_flow")
        throw InputError(row_prefix(source, row) + "expected header 'date,cash_flow'");
      header = true;
      continue;
    }
    if (cells.size() != 2)
      throw InputError(row_prefix(source, row) + "expected 2 fields, found " +
                       std::to_string(cells.size()));
    calibration::Date date;
    try {
      date = calibration::parse_date(cells[0]);
    } catch (const InputError& e) {
      throw InputError(row_prefix(source, row) + e.what());
    }
    if (cells[1].empty()) continue;
    const double value = parse_double(cells[1], row_prefix(source, row) + "cash_flow");
    out.push_back({date, value});
  }
  if (!header) throw InputError(source + ": missing header 'date,cash_flow'");
  return out;
}

std::vector<calibration::RawObservation> read_cash_flow_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_cash_flow_csv(in, path);
}

void write_cash_flow_csv(std::ostream& out, const calibration::CashFlowSeries& series) {
  out << "date,cash_flow\n";
  for (const auto& o : series.observations)
    out << calibration::format_date(o.date) << ',' << format_double(o.value) << '\n';
}

Table read_table_csv(std::istream& in, const std::string& source) {
  Table table;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw InputError(row_prefix(source, row) + "expected " + std::to_string(table.header.size()) +
                       " fields, found " + std::to_string(cells.size()));
    std::vector<double> values;
    for (std::size_t c = 0; c < cells.size(); ++c)
      values.push_back(parse_double(cells[c], row_prefix(source, row) + table.header[c]));
    table.rows.push_back(std::move(values));
  }
  if (table.header.empty()) throw InputError(source + ": empty table");
  return table;
}

void write_table_csv(std::ostream& out, const Table& table) {
  for (std::size_t c = 0; c < table.header.size(); ++c)
    out << (c ? "," : "") << table.header[c];
  out << '\n';
  for (const auto& r : table.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_double(r[c]);
    out << '\n';
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

}  // namespace storecycle::io
