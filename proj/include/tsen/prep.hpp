#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tsen/matrix.hpp"
#include "tsen/panel.hpp"

namespace tsen {

struct ColumnStats {
  double location = 0.0;
  double scale = 1.0;

  double normalize(double x) const noexcept { return (x - location) / scale; }
  double denormalize(double z) const noexcept { return z * scale + location; }
};

/// Per-series, per-column z-score statistics fitted on a leading slice of the
/// time index.
struct NormalizationState {
  std::vector<std::string> series_ids;
  std::vector<std::vector<ColumnStats>> columns;  // [series][0 = target, 1.. = exogenous]
  std::size_t fitted_steps = 0;
  std::vector<std::string> warnings;

  const ColumnStats& target(std::size_t series) const { return columns.at(series).at(0); }
};

/// Fits on the first floor(train_fraction * length) steps only. Constant
/// columns get scale 1 and a warning. Throws ContractError on an empty fit
/// window.
NormalizationState fit_normalizer(const TimeSeriesPanel& panel, double train_fraction);

TimeSeriesPanel normalize(const TimeSeriesPanel& panel, const NormalizationState& state);
TimeSeriesPanel denormalize(const TimeSeriesPanel& panel, const NormalizationState& state);

struct Sample {
  Matrix window;  // lookback x width; row r is step window_end - lookback + 1 + r
  double label = 0.0;
  std::size_t window_end = 0;
  std::size_t label_index = 0;
};

/// Time-ordered (window, label) pairs of one series. Feature 0 of each window
/// row is the target, the rest are exogenous columns in panel order.
struct SupervisedSet {
  std::string series_id;
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  std::size_t width = 0;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
};

/// Window of steps [t-k+1, t] labelled with the target at t+h, for every
/// valid t. Throws DataError when the series is shorter than k + h.
SupervisedSet make_windows(const Series& series, std::size_t lookback, std::size_t horizon);
std::vector<SupervisedSet> make_windows(const TimeSeriesPanel& panel, std::size_t lookback, std::size_t horizon);

/// The most recent `lookback` steps of a series as a window.
Matrix latest_window(const Series& series, std::size_t lookback);

/// First floor(fraction * n) samples train, the rest test. Throws
/// ContractError unless 0 < fraction < 1 and both sides are non-empty.
std::pair<SupervisedSet, SupervisedSet> chronological_split(const SupervisedSet& set, double fraction);

/// Number of leading time steps a normalizer fitted with `fraction` uses.
std::size_t fit_steps(std::size_t length, double fraction);

}  // namespace tsen
