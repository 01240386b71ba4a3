#include "tsen/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "tsen/errors.hpp"

namespace tsen {

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw NumericError("format_double: conversion failed");
  return {buf, end};
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> lines_of(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++number;
    if (!trim(line).empty()) out.emplace_back(number, line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

std::string line_ref(std::size_t line) { return "line " + std::to_string(line) + ": "; }

}  // namespace

double parse_double(std::string_view text, const std::string& where) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) {
    throw IngestError(where + "cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

bool is_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  const int year = std::stoi(std::string(s.substr(0, 4)));
  const int month = std::stoi(std::string(s.substr(5, 2)));
  const int day = std::stoi(std::string(s.substr(8, 2)));
  if (month < 1 || month > 12 || day < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  return day <= kDays[month - 1] + (month == 2 && leap ? 1 : 0);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, target);
}

TimeSeriesPanel parse_panel(std::string_view text, const PanelReadOptions& options) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw IngestError("panel file is empty");
  const auto header = split_line(lines.front().second);
  const std::size_t header_line = lines.front().first;
  static constexpr std::string_view kFixed[] = {"series_id", "date", "target"};
  for (std::size_t i = 0; i < 3; ++i) {
    if (i >= header.size() || header[i] != kFixed[i]) {
      throw IngestError(line_ref(header_line) + "missing column '" + std::string(kFixed[i]) +
                        "' (header must start with series_id,date,target)");
    }
  }
  TimeSeriesPanel panel;
  for (std::size_t i = 3; i < header.size(); ++i) {
    if (header[i].substr(0, 5) != "exog_" || header[i].size() == 5) {
      throw IngestError(line_ref(header_line) + "column '" + std::string(header[i]) + "' must be named exog_<name>");
    }
    panel.exog_names.emplace_back(header[i].substr(5));
  }
  const std::size_t width = header.size();

  struct Row {
    std::size_t line;
    std::vector<double> values;  // NaN for an empty cell
  };
  std::map<std::string, std::map<std::string, Row>> by_series;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto [number, line] = lines[l];
    const auto cells = split_line(line);
    if (cells.size() != width) {
      throw IngestError(line_ref(number) + "expected " + std::to_string(width) + " cells, found " +
                        std::to_string(cells.size()));
    }
    const std::string id(cells[0]);
    if (id.empty()) throw IngestError(line_ref(number) + "empty series_id");
    if (options.exclude.contains(id)) continue;
    if (!is_iso_date(cells[1])) throw IngestError(line_ref(number) + "bad date '" + std::string(cells[1]) + "'");
    Row row{number, {}};
    for (std::size_t c = 2; c < width; ++c) {
      if (cells[c].empty()) {
        if (!options.forward_fill) {
          throw IngestError(line_ref(number) + "missing value in column '" + std::string(header[c]) + "'");
        }
        row.values.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        row.values.push_back(parse_double(cells[c], line_ref(number)));
      }
    }
    auto [it, inserted] = by_series[id].emplace(std::string(cells[1]), std::move(row));
    if (!inserted) {
      throw IngestError(line_ref(number) + "duplicated row for series '" + id + "' at " + std::string(cells[1]) +
                        " (first seen on line " + std::to_string(it->second.line) + ")");
    }
  }
  if (by_series.empty()) throw IngestError("panel has no data rows");

  const auto& reference = by_series.begin()->second;
  for (const auto& [date, row] : reference) panel.dates.push_back(date);
  for (const auto& [id, rows] : by_series) {
    for (const auto& [date, row] : rows) {
      if (!reference.contains(date)) {
        throw IngestError(line_ref(row.line) + "series '" + id + "' has date " + date + " that series '" +
                          by_series.begin()->first + "' lacks");
      }
    }
    for (const auto& [date, row] : reference) {
      if (!rows.contains(date)) {
        throw IngestError(line_ref(row.line) + "series '" + id + "' has no row for date " + date);
      }
    }
    Series s;
    s.id = id;
    s.exogenous.assign(panel.exog_names.size(), {});
    std::vector<double> last(width - 2, std::numeric_limits<double>::quiet_NaN());
    for (const auto& [date, row] : rows) {
      for (std::size_t c = 0; c < row.values.size(); ++c) {
        double v = row.values[c];
        if (std::isnan(v)) {
          if (std::isnan(last[c])) {
            throw IngestError(line_ref(row.line) + "missing value in column '" + std::string(header[c + 2]) +
                              "' with nothing to forward-fill from");
          }
          v = last[c];
        }
        last[c] = v;
        (c == 0 ? s.target : s.exogenous[c - 1]).push_back(v);
      }
    }
    panel.series.push_back(std::move(s));
  }
  panel.validate();
  return panel;
}

TimeSeriesPanel load_panel(const std::string& path, const PanelReadOptions& options) {
  return parse_panel(read_file(path), options);
}

std::string panel_to_csv(const TimeSeriesPanel& panel) {
  std::string out = "series_id,date,target";
  for (const auto& name : panel.exog_names) out += ",exog_" + name;
  out += '\n';
  std::vector<std::size_t> order(panel.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return panel.series[a].id < panel.series[b].id; });
  for (std::size_t i : order) {
    const Series& s = panel.series[i];
    for (std::size_t t = 0; t < panel.length(); ++t) {
      out += s.id + ',' + panel.dates[t] + ',' + format_double(s.target[t]);
      for (const auto& col : s.exogenous) out += ',' + format_double(col[t]);
      out += '\n';
    }
  }
  return out;
}

void write_panel(const std::string& path, const TimeSeriesPanel& panel) { write_file_atomic(path, panel_to_csv(panel)); }

std::string score_table_to_csv(const ScoreTable& table, std::string_view corner) {
  table.validate_shape();
  std::string out(corner);
  for (const auto& c : table.cols) out += ',' + c;
  out += '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out += table.rows[r];
    for (double v : table.values[r]) out += ',' + (std::isnan(v) ? std::string() : format_double(v));
    out += '\n';
  }
  return out;
}

ScoreTable parse_score_table(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw IngestError("score table is empty");
  ScoreTable table;
  const auto header = split_line(lines.front().second);
  if (header.size() < 2) throw IngestError(line_ref(lines.front().first) + "score table needs at least one method column");
  for (std::size_t i = 1; i < header.size(); ++i) table.cols.emplace_back(header[i]);
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto cells = split_line(lines[l].second);
    if (cells.size() != header.size()) {
      throw IngestError(line_ref(lines[l].first) + "expected " + std::to_string(header.size()) + " cells, found " +
                        std::to_string(cells.size()));
    }
    table.rows.emplace_back(cells[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      row.push_back(cells[i].empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : parse_double(cells[i], line_ref(lines[l].first)));
    }
    table.values.push_back(std::move(row));
  }
  return table;
}

ScoreTable load_score_table(const std::string& path) { return parse_score_table(read_file(path)); }

}  // namespace tsen
