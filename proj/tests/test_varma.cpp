#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "tsen/errors.hpp"
#include "tsen/varma.hpp"

namespace tsen {
namespace {

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double eigen_radius(const Matrix& a) {
  Eigen::MatrixXd e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> column(const Matrix& z, std::size_t c, std::size_t begin = 0, std::size_t end = 0) {
  if (end == 0) end = z.rows();
  std::vector<double> out;
  for (std::size_t t = begin; t < end; ++t) out.push_back(z(t, c));
  return out;
}

double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double covariance(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / static_cast<double>(x.size() - 1);
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  return covariance(x, y) / std::sqrt(covariance(x, x) * covariance(y, y));
}

TEST(Varma, WhiteNoiseMomentsMatch) {
  VarmaSpec spec;
  spec.dim = 3;
  spec.sigma = identity(3);
  Rng rng(1);
  const Matrix z = simulate_varma(spec, 10000, rng);
  ASSERT_EQ(z.rows(), 10000u);
  ASSERT_EQ(z.cols(), 3u);
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_LT(std::abs(mean(column(z, a))), 0.1);
    for (std::size_t b = 0; b < 3; ++b) {
      EXPECT_LT(std::abs(covariance(column(z, a), column(z, b)) - (a == b ? 1.0 : 0.0)), 0.15);
    }
  }
}

TEST(Varma, ScalarArOneVariance) {
  VarmaSpec spec;
  spec.phi = {Matrix{{0.5}}};
  spec.sigma = Matrix{{1.0}};
  Rng rng(2);
  const auto x = column(simulate_varma(spec, 50000, rng), 0);
  EXPECT_NEAR(covariance(x, x), 4.0 / 3.0, 0.05 * 4.0 / 3.0);
}

TEST(Varma, ScalarMaOneUsesMinusSign) {
  // Z_t = G_t - 0.6 G_{t-1}: lag-1 autocorrelation -0.6 / 1.36.
  VarmaSpec spec;
  spec.theta = {Matrix{{0.6}}};
  spec.sigma = Matrix{{1.0}};
  Rng rng(3);
  const auto x = column(simulate_varma(spec, 50000, rng), 0);
  const std::vector<double> lead(x.begin() + 1, x.end());
  const std::vector<double> lag(x.begin(), x.end() - 1);
  EXPECT_NEAR(correlation(lead, lag), -0.6 / 1.36, 0.02);
}

TEST(Varma, DeterministicUnderSeed) {
  Rng rng(4);
  const VarmaSpec spec = sample_coefficients(3, 2, 2, rng, Stationarity::rescale);
  Rng a(9), b(9), c(10);
  const Matrix za = simulate_varma(spec, 300, a);
  EXPECT_EQ(za, simulate_varma(spec, 300, b));
  EXPECT_NE(za, simulate_varma(spec, 300, c));
}

TEST(Varma, NonPositiveDefiniteSigmaIsANumericError) {
  VarmaSpec spec;
  spec.dim = 2;
  spec.sigma = Matrix{{1.0, 2.0}, {2.0, 1.0}};
  Rng rng(5);
  EXPECT_THROW(simulate_varma(spec, 10, rng), NumericError);
}

TEST(Coefficients, StationaryWithDiagonalMaAndFixedSigma) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const VarmaSpec spec = sample_coefficients(6, 3, 3, rng, Stationarity::rescale);
    const double r = eigen_radius(companion(spec));
    EXPECT_LT(r, kStationarityBound);
    EXPECT_NEAR(r, spectral_radius(companion(spec)), 1e-9);
    for (const Matrix& t : spec.theta) {
      for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
          if (i == j) {
            EXPECT_LE(std::abs(t(i, j)), 0.5);
          } else {
            EXPECT_EQ(t(i, j), 0.0);
          }
        }
      }
    }
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(spec.sigma(i, j), i == j ? 2.0 : 0.7);
    EXPECT_NO_THROW(cholesky(spec.sigma));
  }
}

TEST(Coefficients, SmallSystemsPassByRejection) {
  Rng rng(7);
  const VarmaSpec spec = sample_coefficients(2, 1, 1, rng);
  EXPECT_LT(eigen_radius(companion(spec)), kStationarityBound);
}

TEST(Coefficients, RejectionGivesUpAfterMaxDraws) {
  Rng rng(8);
  EXPECT_THROW(sample_coefficients(6, 3, 3, rng, Stationarity::reject, 1), GenerationError);
}

TEST(Coefficients, ScaleRootsScalesEigenvalues) {
  Rng rng(9);
  VarmaSpec spec = sample_coefficients(3, 2, 1, rng, Stationarity::rescale);
  const double before = eigen_radius(companion(spec));
  scale_roots(spec, 0.5);
  EXPECT_NEAR(eigen_radius(companion(spec)), 0.5 * before, 1e-12);
}

TEST(Cases, ShapesAndNames) {
  const std::size_t obs[] = {100, 1000, 100, 100};
  const std::size_t noise[] = {0, 0, 5, 5};
  for (int id = 1; id <= 4; ++id) {
    const SimCase sim = sim_case(id);
    EXPECT_EQ(sim.n_obs, obs[id - 1]);
    EXPECT_EQ(sim.targets_correlated, id != 4);
    Rng rng(static_cast<std::uint64_t>(id));
    const TimeSeriesPanel panel = compose_case(sim, rng);
    panel.validate();
    EXPECT_EQ(panel.length(), obs[id - 1]);
    EXPECT_EQ(panel.size(), 4u);
    EXPECT_EQ(panel.exog_names.size(), 5 + noise[id - 1]);
    EXPECT_EQ(panel.series[0].id, "region1");
    EXPECT_EQ(panel.exog_names[0], "x1");
    EXPECT_EQ(panel.dates.front(), "2000-01-01");
  }
  EXPECT_THROW(sim_case(0), ContractError);
  EXPECT_THROW(sim_case(5), ContractError);
  EXPECT_EQ(monthly_dates(14).back(), "2001-02-01");
}

double mean_abs_target_correlation(const TimeSeriesPanel& panel) {
  double total = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < panel.size(); ++a) {
    for (std::size_t b = a + 1; b < panel.size(); ++b) {
      total += std::abs(correlation(panel.series[a].target, panel.series[b].target));
      ++pairs;
    }
  }
  return total / pairs;
}

TEST(Cases, CorrelatedTargetsAreMoreCorrelated) {
  double correlated = 0.0, independent = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng a(seed), b(seed);
    correlated += mean_abs_target_correlation(compose_case(sim_case(3), a)) / 20;
    independent += mean_abs_target_correlation(compose_case(sim_case(4), b)) / 20;
  }
  EXPECT_LT(independent, 0.3);
  EXPECT_GT(correlated, independent);
}

TEST(Cases, StableAcrossHalves) {
  Rng rng(11);
  const TimeSeriesPanel panel = compose_case(sim_case(2), rng);
  for (const Series& s : panel.series) {
    const std::vector<double> first(s.target.begin(), s.target.begin() + 500);
    const std::vector<double> second(s.target.begin() + 500, s.target.end());
    const double ratio = covariance(first, first) / covariance(second, second);
    EXPECT_GT(ratio, 0.5) << s.id;
    EXPECT_LT(ratio, 2.0) << s.id;
  }
}

TEST(Cases, DeterministicUnderSeed) {
  Rng a(12), b(12);
  const TimeSeriesPanel x = compose_case(sim_case(1), a);
  const TimeSeriesPanel y = compose_case(sim_case(1), b);
  for (std::size_t s = 0; s < x.size(); ++s) {
    EXPECT_EQ(x.series[s].target, y.series[s].target);
    EXPECT_EQ(x.series[s].exogenous, y.series[s].exogenous);
  }
}

}  // namespace
}  // namespace tsen
