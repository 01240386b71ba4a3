#pragma once

#include <set>
#include <string>
#include <string_view>

#include "tsen/evalstats.hpp"
#include "tsen/panel.hpp"

namespace tsen {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
/// Whole-string decimal parse; nullopt-free: throws IngestError naming `where`.
double parse_double(std::string_view text, const std::string& where);

/// True for a valid calendar date written YYYY-MM-DD.
bool is_iso_date(std::string_view text);

std::string read_file(const std::string& path);
/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view content);

struct PanelReadOptions {
  std::set<std::string> exclude;  // series ids dropped at ingestion
  bool forward_fill = false;      // fill empty cells from the previous date
};

/// Parses the `series_id,date,target,exog_<name>...` format. Rows may come
/// in any order; the panel is sorted by date. Throws IngestError with the
/// offending line number on a bad header, wrong cell count, unparseable or
/// missing value, bad date, duplicated (series_id, date) or misaligned dates.
TimeSeriesPanel parse_panel(std::string_view text, const PanelReadOptions& options = {});
TimeSeriesPanel load_panel(const std::string& path, const PanelReadOptions& options = {});

/// Rows sorted by (series_id, date).
std::string panel_to_csv(const TimeSeriesPanel& panel);
void write_panel(const std::string& path, const TimeSeriesPanel& panel);

/// First column holds row labels under `corner`; NaN cells are written empty.
std::string score_table_to_csv(const ScoreTable& table, std::string_view corner = "series");
ScoreTable parse_score_table(std::string_view text);
ScoreTable load_score_table(const std::string& path);

}  // namespace tsen
