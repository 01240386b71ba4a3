#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tsen {

/// One multivariate series: a target plus named exogenous columns, all on the
/// panel's shared time index.
struct Series {
  std::string id;
  std::vector<double> target;
  std::vector<std::vector<double>> exogenous;  // [column][time]
};

/// J aligned series. Every series carries the panel's exogenous columns.
struct TimeSeriesPanel {
  std::vector<std::string> dates;  // ISO-8601, ascending
  std::vector<std::string> exog_names;
  std::vector<Series> series;

  std::size_t length() const noexcept { return dates.size(); }
  std::size_t size() const noexcept { return series.size(); }
  /// Target plus exogenous columns.
  std::size_t input_width() const noexcept { return 1 + exog_names.size(); }

  /// Index of the series with `id`; throws ContractError when absent.
  std::size_t index_of(const std::string& id) const;
  std::vector<std::string> ids() const;

  /// Checks alignment, unique ids and column lengths. Throws ContractError.
  void validate() const;

  /// Restricts every series to time steps [begin, end).
  TimeSeriesPanel slice(std::size_t begin, std::size_t end) const;
  TimeSeriesPanel select(const std::vector<std::string>& ids) const;
};

}  // namespace tsen
