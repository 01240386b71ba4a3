#include "tsen/panel.hpp"

#include <set>

#include "tsen/errors.hpp"

namespace tsen {

std::size_t TimeSeriesPanel::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series[i].id == id) return i;
  throw ContractError("unknown series id '" + id + "'");
}

std::vector<std::string> TimeSeriesPanel::ids() const {
  std::vector<std::string> out;
  out.reserve(series.size());
  for (const auto& s : series) out.push_back(s.id);
  return out;
}

void TimeSeriesPanel::validate() const {
  std::set<std::string> seen;
  for (const auto& s : series) {
    if (!seen.insert(s.id).second) throw ContractError("duplicate series id '" + s.id + "'");
    if (s.target.size() != dates.size()) {
      throw ContractError("series '" + s.id + "' has " + std::to_string(s.target.size()) + " targets for " +
                          std::to_string(dates.size()) + " dates");
    }
    if (s.exogenous.size() != exog_names.size()) {
      throw ContractError("series '" + s.id + "' has " + std::to_string(s.exogenous.size()) +
                          " exogenous columns, panel declares " + std::to_string(exog_names.size()));
    }
    for (const auto& col : s.exogenous)
      if (col.size() != dates.size()) throw ContractError("series '" + s.id + "' has a misaligned exogenous column");
  }
  for (std::size_t t = 1; t < dates.size(); ++t)
    if (!(dates[t - 1] < dates[t])) throw ContractError("panel dates are not strictly increasing at " + dates[t]);
}

TimeSeriesPanel TimeSeriesPanel::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > length()) throw ContractError("panel slice out of range");
  TimeSeriesPanel out;
  out.dates.assign(dates.begin() + begin, dates.begin() + end);
  out.exog_names = exog_names;
  for (const auto& s : series) {
    Series c;
    c.id = s.id;
    c.target.assign(s.target.begin() + begin, s.target.begin() + end);
    for (const auto& col : s.exogenous) c.exogenous.emplace_back(col.begin() + begin, col.begin() + end);
    out.series.push_back(std::move(c));
  }
  return out;
}

TimeSeriesPanel TimeSeriesPanel::select(const std::vector<std::string>& wanted) const {
  TimeSeriesPanel out;
  out.dates = dates;
  out.exog_names = exog_names;
  for (const auto& id : wanted) out.series.push_back(series[index_of(id)]);
  return out;
}

}  // namespace tsen
