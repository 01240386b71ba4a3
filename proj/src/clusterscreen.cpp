#include "tsen/clusterscreen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tsen/errors.hpp"

namespace tsen {

void DistanceMatrix::set(std::size_t u, std::size_t v, double value) {
  d_[u * n_ + v] = value;
  d_[v * n_ + u] = value;
}

DistanceMatrix pairwise_distance(std::span<const std::vector<double>> targets) {
  DistanceMatrix d(targets.size());
  for (std::size_t u = 0; u < targets.size(); ++u) {
    if (targets[u].size() != targets.front().size()) {
      throw ContractError("pairwise_distance: series " + std::to_string(u) + " has length " +
                          std::to_string(targets[u].size()) + ", expected " + std::to_string(targets.front().size()));
    }
  }
  for (std::size_t u = 0; u < targets.size(); ++u) {
    for (std::size_t v = u + 1; v < targets.size(); ++v) {
      double s = 0.0;
      for (std::size_t t = 0; t < targets[u].size(); ++t) {
        const double diff = targets[u][t] - targets[v][t];
        s += diff * diff;
      }
      d.set(u, v, s);
    }
  }
  return d;
}

std::string_view to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::single:
      return "single";
    case Linkage::complete:
      return "complete";
    case Linkage::average:
      return "average";
  }
  return "?";
}

Linkage parse_linkage(std::string_view name) {
  if (name == "single") return Linkage::single;
  if (name == "complete") return Linkage::complete;
  if (name == "average") return Linkage::average;
  throw UsageError("unknown linkage '" + std::string(name) + "' (expected single, complete or average)");
}

std::vector<Merge> merge_sequence(const DistanceMatrix& d, Linkage linkage) {
  const std::size_t n = d.size();
  // Lance-Williams recurrences on a working copy of the distances.
  std::vector<double> link(n * n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) link[u * n + v] = d(u, v);
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<Merge> merges;
  merges.reserve(n > 0 ? n - 1 : 0);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    Merge best{0, 0, std::numeric_limits<double>::infinity()};
    for (std::size_t a = 0; a < n; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (active[b] && link[a * n + b] < best.distance) best = {a, b, link[a * n + b]};
      }
    }
    const std::size_t a = best.left;
    const std::size_t b = best.right;
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) continue;
      const double da = link[a * n + k];
      const double db = link[b * n + k];
      double merged = 0.0;
      switch (linkage) {
        case Linkage::single:
          merged = std::min(da, db);
          break;
        case Linkage::complete:
          merged = std::max(da, db);
          break;
        case Linkage::average:
          merged = (static_cast<double>(size[a]) * da + static_cast<double>(size[b]) * db) /
                   static_cast<double>(size[a] + size[b]);
          break;
      }
      link[a * n + k] = merged;
      link[k * n + a] = merged;
    }
    size[a] += size[b];
    active[b] = false;
    merges.push_back(best);
  }
  return merges;
}

std::vector<std::vector<std::size_t>> GroupPartition::groups() const {
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < assignment.size(); ++i) out.at(assignment[i]).push_back(i);
  return out;
}

void GroupPartition::validate() const {
  if (!series_ids.empty() && series_ids.size() != assignment.size()) {
    throw ContractError("partition: " + std::to_string(series_ids.size()) + " ids for " +
                        std::to_string(assignment.size()) + " assignments");
  }
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t g : assignment) {
    if (g >= k) throw ContractError("partition: group id " + std::to_string(g) + " out of range");
    ++counts[g];
  }
  for (std::size_t g = 0; g < k; ++g)
    if (counts[g] == 0) throw ContractError("partition: group " + std::to_string(g) + " is empty");
}

GroupPartition agglomerate(const DistanceMatrix& d, std::size_t k, Linkage linkage) {
  const std::size_t n = d.size();
  if (k < 1 || k > n) {
    throw ContractError("agglomerate: K=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  const std::vector<Merge> merges = merge_sequence(d, linkage);
  std::vector<std::size_t> root(n);
  std::iota(root.begin(), root.end(), 0);
  auto find = [&](std::size_t x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  for (std::size_t m = 0; m < n - k; ++m) root[find(merges[m].right)] = find(merges[m].left);

  GroupPartition p;
  p.k = k;
  p.assignment.assign(n, 0);
  std::vector<std::size_t> group_of_root(n, n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (group_of_root[r] == n) group_of_root[r] = next++;
    p.assignment[i] = group_of_root[r];
  }
  return p;
}

GroupPartition label(GroupPartition partition, std::vector<std::string> ids) {
  partition.series_ids = std::move(ids);
  partition.validate();
  return partition;
}

std::vector<TimeSeriesPanel> screen(const TimeSeriesPanel& panel, const GroupPartition& partition) {
  partition.validate();
  std::vector<std::string> ids = partition.series_ids.empty() ? panel.ids() : partition.series_ids;
  if (ids.size() != partition.assignment.size()) {
    throw ContractError("screen: partition covers " + std::to_string(partition.assignment.size()) +
                        " series, panel has " + std::to_string(ids.size()));
  }
  std::vector<std::vector<std::string>> members(partition.k);
  for (std::size_t i = 0; i < ids.size(); ++i) members[partition.assignment[i]].push_back(ids[i]);
  std::vector<TimeSeriesPanel> out;
  out.reserve(partition.k);
  for (const auto& group : members) out.push_back(panel.select(group));
  return out;
}

double silhouette_score(const DistanceMatrix& d, const GroupPartition& partition) {
  partition.validate();
  const std::size_t n = d.size();
  if (partition.assignment.size() != n) throw ContractError("silhouette_score: partition size mismatch");
  const auto groups = partition.groups();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& own = groups[partition.assignment[i]];
    if (own.size() < 2) continue;
    double a = 0.0;
    for (std::size_t j : own) a += d(i, j);
    a /= static_cast<double>(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (g == partition.assignment[i]) continue;
      double s = 0.0;
      for (std::size_t j : groups[g]) s += d(i, j);
      b = std::min(b, s / static_cast<double>(groups[g].size()));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0 && std::isfinite(b)) total += (b - a) / denom;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

}  // namespace tsen
