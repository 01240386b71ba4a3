#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsen {

/// Throw ContractError on empty or unequal-length inputs.
double mae(std::span<const double> pred, std::span<const double> actual);
double mse(std::span<const double> pred, std::span<const double> actual);
double rmse(std::span<const double> pred, std::span<const double> actual);

/// Rank 1 = lowest value; ties share the average of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

/// Rows are datasets (series), columns are methods; lower is better. NaN
/// marks a missing cell.
struct ScoreTable {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<std::vector<double>> values;  // [row][col]

  std::size_t column_index(std::string_view name) const;
  std::vector<double> column(std::size_t c) const;
  /// Copy without rows that contain a missing cell.
  ScoreTable complete_rows() const;
  /// Throws ContractError on ragged rows or mismatched labels.
  void validate_shape() const;
};

enum class Alternative { a_better, two_sided };
enum class WilcoxonMethod { automatic, exact, normal };

std::string_view to_string(Alternative alternative);
Alternative parse_alternative(std::string_view name);

struct TestResult {
  std::string method;  // "friedman" or "wilcoxon"
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;    // datasets for Friedman, non-zero pairs for Wilcoxon
  std::size_t df = 0;   // Friedman only
  std::string detail;   // p-value method / hypothesis
  std::vector<double> average_ranks;  // Friedman only, per column
};

/// Friedman chi-squared over average ranks. Throws ContractError when the
/// table has fewer than 2 rows or columns, or any missing/non-finite cell.
TestResult friedman(const ScoreTable& table);

/// Paired signed-rank test on d = a - b with zero differences dropped. The
/// statistic is min(W+, W-). Under `a_better` the p-value is the lower tail
/// of W+ (a has lower values). Exact when n <= 20 (or forced), otherwise a
/// tie- and continuity-corrected normal approximation. Throws ContractError
/// on unequal lengths or fewer than 5 non-zero pairs, and DataError when
/// every difference is zero.
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                Alternative alternative = Alternative::a_better,
                                WilcoxonMethod method = WilcoxonMethod::automatic);

inline constexpr std::size_t kWilcoxonMinPairs = 5;
inline constexpr std::size_t kWilcoxonExactLimit = 20;

/// Upper tail of the chi-squared distribution. Throws ContractError on
/// df < 1 or x < 0.
double chi_squared_sf(double x, double df);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
double normal_cdf(double z);

}  // namespace tsen
