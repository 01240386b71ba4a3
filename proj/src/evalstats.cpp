#include "tsen/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tsen/errors.hpp"

namespace tsen {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> actual, const char* what) {
  if (pred.empty() || pred.size() != actual.size()) {
    throw ContractError(std::string(what) + ": need equal non-empty lengths, got " + std::to_string(pred.size()) +
                        " and " + std::to_string(actual.size()));
  }
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - actual[i]);
  return s / static_cast<double>(pred.size());
}

double mse(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return s / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> actual) { return std::sqrt(mse(pred, actual)); }

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t r = i; r <= j; ++r) ranks[order[r]] = shared;
    i = j + 1;
  }
  return ranks;
}

std::size_t ScoreTable::column_index(std::string_view name) const {
  auto it = std::find(cols.begin(), cols.end(), name);
  if (it == cols.end()) throw ContractError("score table has no column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - cols.begin());
}

std::vector<double> ScoreTable::column(std::size_t c) const {
  std::vector<double> out;
  for (const auto& row : values) out.push_back(row.at(c));
  return out;
}

ScoreTable ScoreTable::complete_rows() const {
  ScoreTable out{{}, cols, {}};
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (std::none_of(values[r].begin(), values[r].end(), [](double v) { return std::isnan(v); })) {
      out.rows.push_back(rows[r]);
      out.values.push_back(values[r]);
    }
  }
  return out;
}

void ScoreTable::validate_shape() const {
  if (rows.size() != values.size()) throw ContractError("score table: row labels do not match rows");
  for (const auto& row : values) {
    if (row.size() != cols.size()) throw ContractError("score table: ragged row");
  }
}

std::string_view to_string(Alternative alternative) {
  return alternative == Alternative::a_better ? "a_better" : "two_sided";
}

Alternative parse_alternative(std::string_view name) {
  if (name == "a_better") return Alternative::a_better;
  if (name == "two_sided") return Alternative::two_sided;
  throw UsageError("unknown alternative '" + std::string(name) + "' (expected a_better or two_sided)");
}

TestResult friedman(const ScoreTable& table) {
  table.validate_shape();
  const std::size_t d = table.rows.size();
  const std::size_t k = table.cols.size();
  if (d < 2 || k < 2) {
    throw ContractError("friedman: need at least 2 datasets and 2 methods, got " + std::to_string(d) + "x" +
                        std::to_string(k));
  }
  std::vector<double> mean_rank(k, 0.0);
  for (const auto& row : table.values) {
    if (!std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); })) {
      throw ContractError("friedman: table has a missing or non-finite entry");
    }
    const auto r = average_ranks(row);
    for (std::size_t j = 0; j < k; ++j) mean_rank[j] += r[j];
  }
  double sum_sq = 0.0;
  for (double& r : mean_rank) {
    r /= static_cast<double>(d);
    sum_sq += r * r;
  }
  const double kk = static_cast<double>(k);
  double chi2 = 12.0 * static_cast<double>(d) / (kk * (kk + 1.0)) * (sum_sq - kk * (kk + 1.0) * (kk + 1.0) / 4.0);
  chi2 = std::max(chi2, 0.0);
  TestResult out;
  out.method = "friedman";
  out.statistic = chi2;
  out.df = k - 1;
  out.p_value = chi_squared_sf(chi2, static_cast<double>(k - 1));
  out.n = d;
  out.detail = "rows are datasets; rank 1 = lowest score";
  out.average_ranks = std::move(mean_rank);
  return out;
}

namespace {

// Lower-tail probability P(W+ <= w) under the null, counting sign patterns
// over doubled (hence integer) ranks.
double exact_lower_tail(std::span<const long> doubled_ranks, long doubled_w) {
  const long total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0L);
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  long reach = 0;
  for (long r : doubled_ranks) {
    reach += r;
    for (long s = reach; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
  }
  double below = 0.0;
  for (long s = 0; s <= std::min(doubled_w, total); ++s) below += count[static_cast<std::size_t>(s)];
  return below / std::ldexp(1.0, static_cast<int>(doubled_ranks.size()));
}

}  // namespace

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Alternative alternative,
                                WilcoxonMethod method) {
  if (a.size() != b.size()) {
    throw ContractError("wilcoxon: paired samples differ in length (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  }
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw ContractError("wilcoxon: non-finite difference at index " + std::to_string(i));
    if (d != 0.0) diff.push_back(d);
  }
  if (!a.empty() && diff.empty()) throw DataError("wilcoxon: every paired difference is zero");
  const std::size_t n = diff.size();
  if (n < kWilcoxonMinPairs) {
    throw ContractError("wilcoxon: need at least " + std::to_string(kWilcoxonMinPairs) + " non-zero differences, got " +
                        std::to_string(n));
  }

  std::vector<double> magnitude(n);
  for (std::size_t i = 0; i < n; ++i) magnitude[i] = std::abs(diff[i]);
  const std::vector<double> ranks = average_ranks(magnitude);
  double w_plus = 0.0;
  double w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i) (diff[i] > 0 ? w_plus : w_minus) += ranks[i];

  const bool exact = method == WilcoxonMethod::exact ||
                     (method == WilcoxonMethod::automatic && n <= kWilcoxonExactLimit);
  double lower = 0.0;  // P(W+ <= observed)
  double upper = 0.0;  // P(W+ >= observed)
  if (exact) {
    std::vector<long> doubled(n);
    for (std::size_t i = 0; i < n; ++i) doubled[i] = std::lround(2.0 * ranks[i]);
    const long w2 = std::lround(2.0 * w_plus);
    lower = exact_lower_tail(doubled, w2);
    upper = 1.0 - exact_lower_tail(doubled, w2 - 1);
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    std::vector<double> sorted = magnitude;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      var -= (t * t * t - t) / 48.0;
      i = j;
    }
    const double sd = std::sqrt(var);
    lower = normal_cdf((w_plus - mean + 0.5) / sd);
    upper = 1.0 - normal_cdf((w_plus - mean - 0.5) / sd);
  }

  TestResult out;
  out.method = "wilcoxon";
  out.statistic = std::min(w_plus, w_minus);
  out.n = n;
  if (alternative == Alternative::a_better) {
    out.p_value = lower;
    out.detail = "H1: a better (lower) than b";
  } else {
    out.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
    out.detail = "H1: a and b differ";
  }
  out.p_value = std::clamp(out.p_value, 0.0, 1.0);
  out.detail += exact ? "; exact" : "; normal approximation";
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

constexpr int kMaxGammaIterations = 1000;
constexpr double kGammaTolerance = 1e-16;

double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxGammaIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaTolerance) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxGammaIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaTolerance) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw ContractError("regularized_gamma_p: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_fraction(a, x);
}

double chi_squared_sf(double x, double df) {
  if (!(df >= 1.0)) throw ContractError("chi_squared_sf: degrees of freedom must be at least 1");
  if (!(x >= 0.0)) throw ContractError("chi_squared_sf: x must be non-negative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double a = df / 2.0;
  const double h = x / 2.0;
  const double q = h < a + 1.0 ? 1.0 - gamma_p_series(a, h) : gamma_q_fraction(a, h);
  return std::clamp(q, 0.0, 1.0);
}

}  // namespace tsen
