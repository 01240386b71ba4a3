#include "tsen/prep.hpp"

#include <algorithm>
#include <cmath>

#include "tsen/errors.hpp"

namespace tsen {

namespace {

std::size_t leading_count(std::size_t n, double fraction) {
  // The epsilon keeps products like 0.7 * 10 from flooring to 6.
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

ColumnStats fit_column(const std::vector<double>& values, std::size_t steps, const std::string& what,
                       std::vector<std::string>& warnings) {
  const auto first = values.begin();
  const auto last = values.begin() + static_cast<std::ptrdiff_t>(steps);
  const auto [lo, hi] = std::minmax_element(first, last);
  if (*lo == *hi) {
    warnings.push_back(what + " is constant on the fit window; using scale 1");
    return {*lo, 1.0};
  }
  double mean = 0.0;
  for (auto it = first; it != last; ++it) mean += *it;
  mean /= static_cast<double>(steps);
  double var = 0.0;
  for (auto it = first; it != last; ++it) var += (*it - mean) * (*it - mean);
  var /= static_cast<double>(steps);
  return {mean, std::sqrt(var)};
}

TimeSeriesPanel transform(const TimeSeriesPanel& panel, const NormalizationState& state, bool forward) {
  if (state.series_ids.size() != panel.size()) {
    throw ContractError("normalization state covers " + std::to_string(state.series_ids.size()) +
                        " series, panel has " + std::to_string(panel.size()));
  }
  TimeSeriesPanel out = panel;
  for (std::size_t s = 0; s < out.size(); ++s) {
    Series& series = out.series[s];
    if (series.id != state.series_ids[s]) throw ContractError("normalization state does not match series '" + series.id + "'");
    auto apply = [&](std::vector<double>& col, const ColumnStats& st) {
      for (double& v : col) v = forward ? st.normalize(v) : st.denormalize(v);
    };
    apply(series.target, state.columns[s][0]);
    for (std::size_t c = 0; c < series.exogenous.size(); ++c) apply(series.exogenous[c], state.columns[s][c + 1]);
  }
  return out;
}

}  // namespace

std::size_t fit_steps(std::size_t length, double fraction) { return leading_count(length, fraction); }

NormalizationState fit_normalizer(const TimeSeriesPanel& panel, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ContractError("fit_normalizer: train fraction must lie in (0, 1]");
  }
  NormalizationState state;
  state.fitted_steps = leading_count(panel.length(), train_fraction);
  if (state.fitted_steps == 0) throw ContractError("fit_normalizer: empty training split");
  for (const Series& s : panel.series) {
    state.series_ids.push_back(s.id);
    std::vector<ColumnStats> cols;
    cols.push_back(fit_column(s.target, state.fitted_steps, s.id + ".target", state.warnings));
    for (std::size_t c = 0; c < s.exogenous.size(); ++c) {
      cols.push_back(fit_column(s.exogenous[c], state.fitted_steps, s.id + "." + panel.exog_names[c], state.warnings));
    }
    state.columns.push_back(std::move(cols));
  }
  return state;
}

TimeSeriesPanel normalize(const TimeSeriesPanel& panel, const NormalizationState& state) {
  return transform(panel, state, true);
}

TimeSeriesPanel denormalize(const TimeSeriesPanel& panel, const NormalizationState& state) {
  return transform(panel, state, false);
}

namespace {

Matrix window_at(const Series& series, std::size_t end, std::size_t lookback) {
  const std::size_t width = 1 + series.exogenous.size();
  Matrix w(lookback, width);
  for (std::size_t r = 0; r < lookback; ++r) {
    const std::size_t t = end + 1 - lookback + r;
    w(r, 0) = series.target[t];
    for (std::size_t c = 0; c < series.exogenous.size(); ++c) w(r, c + 1) = series.exogenous[c][t];
  }
  return w;
}

}  // namespace

SupervisedSet make_windows(const Series& series, std::size_t lookback, std::size_t horizon) {
  if (lookback == 0 || horizon == 0) throw ContractError("make_windows: lookback and horizon must be at least 1");
  const std::size_t length = series.target.size();
  if (length < lookback + horizon) {
    throw DataError("series '" + series.id + "' has " + std::to_string(length) + " steps; lookback " +
                    std::to_string(lookback) + " + horizon " + std::to_string(horizon) + " needs more");
  }
  SupervisedSet set;
  set.series_id = series.id;
  set.lookback = lookback;
  set.horizon = horizon;
  set.width = 1 + series.exogenous.size();
  for (std::size_t end = lookback - 1; end + horizon < length; ++end) {
    set.samples.push_back({window_at(series, end, lookback), series.target[end + horizon], end, end + horizon});
  }
  return set;
}

std::vector<SupervisedSet> make_windows(const TimeSeriesPanel& panel, std::size_t lookback, std::size_t horizon) {
  std::vector<SupervisedSet> out;
  out.reserve(panel.size());
  for (const Series& s : panel.series) out.push_back(make_windows(s, lookback, horizon));
  return out;
}

Matrix latest_window(const Series& series, std::size_t lookback) {
  if (lookback == 0 || series.target.size() < lookback) {
    throw DataError("series '" + series.id + "' is shorter than the lookback " + std::to_string(lookback));
  }
  return window_at(series, series.target.size() - 1, lookback);
}

std::pair<SupervisedSet, SupervisedSet> chronological_split(const SupervisedSet& set, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ContractError("chronological_split: fraction must lie strictly between 0 and 1");
  }
  const std::size_t n_train = leading_count(set.size(), fraction);
  if (n_train == 0 || n_train >= set.size()) {
    throw ContractError("chronological_split: " + std::to_string(set.size()) + " samples at fraction " +
                        std::to_string(fraction) + " leave one side empty");
  }
  SupervisedSet train = set;
  SupervisedSet test = set;
  train.samples.assign(set.samples.begin(), set.samples.begin() + static_cast<std::ptrdiff_t>(n_train));
  test.samples.assign(set.samples.begin() + static_cast<std::ptrdiff_t>(n_train), set.samples.end());
  return {std::move(train), std::move(test)};
}

}  // namespace tsen
