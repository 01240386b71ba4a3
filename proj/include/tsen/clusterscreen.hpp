#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsen/panel.hpp"

namespace tsen {

/// Symmetric, zero-diagonal, nonnegative n x n matrix of squared Euclidean
/// distances between target series.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t u, std::size_t v) const { return d_[u * n_ + v]; }
  /// Sets both (u, v) and (v, u).
  void set(std::size_t u, std::size_t v, double value);

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

/// d_uv = sum_t (Y_u[t] - Y_v[t])^2. Throws ContractError on unequal lengths.
DistanceMatrix pairwise_distance(std::span<const std::vector<double>> targets);

enum class Linkage { single, complete, average };

std::string_view to_string(Linkage linkage);
Linkage parse_linkage(std::string_view name);

/// One agglomeration step. Clusters are labelled by their smallest member,
/// so `left < right` and the merged cluster keeps the label `left`.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double distance = 0.0;
};

/// Full bottom-up merge history (n - 1 steps). Among equally close pairs the
/// lexicographically smallest (left, right) merges first.
std::vector<Merge> merge_sequence(const DistanceMatrix& d, Linkage linkage = Linkage::average);

/// Disjoint cover of the series by K non-empty groups. Group ids are ordered
/// by each group's smallest member index.
struct GroupPartition {
  std::vector<std::string> series_ids;
  std::vector<std::size_t> assignment;  // series index -> group id
  std::size_t k = 0;

  std::vector<std::vector<std::size_t>> groups() const;
  /// Throws ContractError if any group is empty or ids are out of range.
  void validate() const;
};

/// Cuts the dendrogram at K clusters. Throws ContractError unless 1 <= K <= n.
GroupPartition agglomerate(const DistanceMatrix& d, std::size_t k, Linkage linkage = Linkage::average);

/// Names the series of a partition built from pairwise_distance over `ids`.
GroupPartition label(GroupPartition partition, std::vector<std::string> ids);

/// One sub-panel per group carrying its members' full series.
std::vector<TimeSeriesPanel> screen(const TimeSeriesPanel& panel, const GroupPartition& partition);

/// Mean silhouette coefficient of a partition, in [-1, 1]. Not part of the
/// core clustering flow: K is always supplied by the caller; this only helps
/// compare candidate K values by hand. Singletons score 0.
double silhouette_score(const DistanceMatrix& d, const GroupPartition& partition);

}  // namespace tsen
