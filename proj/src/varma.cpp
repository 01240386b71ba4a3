#include "tsen/varma.hpp"

#include <cstdio>
#include <string>

#include "tsen/errors.hpp"

namespace tsen {

void VarmaSpec::validate() const {
  if (dim == 0) throw ShapeError("varma: dimension must be positive");
  auto check = [&](const Matrix& m, const char* what) {
    if (m.rows() != dim || m.cols() != dim) {
      throw ShapeError(std::string("varma: ") + what + " is " + m.shape_string() + ", expected " +
                       std::to_string(dim) + "x" + std::to_string(dim));
    }
  };
  for (const Matrix& m : phi) check(m, "AR matrix");
  for (const Matrix& m : theta) check(m, "MA matrix");
  check(sigma, "innovation covariance");
}

Matrix companion(const VarmaSpec& spec) {
  const std::size_t d = spec.dim;
  const std::size_t n = d * spec.p();
  Matrix c(n, n);
  for (std::size_t lag = 0; lag < spec.p(); ++lag)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c(i, lag * d + j) = spec.phi[lag](i, j);
  for (std::size_t i = d; i < n; ++i) c(i, i - d) = 1.0;
  return c;
}

void scale_roots(VarmaSpec& spec, double c) {
  double factor = 1.0;
  for (Matrix& m : spec.phi) {
    factor *= c;
    m *= factor;
  }
}

VarmaSpec sample_coefficients(std::size_t dim, std::size_t p, std::size_t q, Rng& rng, Stationarity policy,
                              int max_draws) {
  if (dim == 0 || p == 0 || q == 0) throw ContractError("sample_coefficients: dim, p and q must be at least 1");
  VarmaSpec spec;
  spec.dim = dim;
  spec.sigma = Matrix(dim, dim, 0.7);
  for (std::size_t i = 0; i < dim; ++i) spec.sigma(i, i) = 2.0;

  bool stationary = false;
  const int draws = policy == Stationarity::reject ? max_draws : 1;
  for (int attempt = 0; attempt < draws && !stationary; ++attempt) {
    spec.phi.assign(p, Matrix(dim, dim));
    for (Matrix& m : spec.phi)
      for (double& v : m.data()) v = uniform(rng, -0.5, 0.5);
    const double radius = spectral_radius(companion(spec));
    stationary = radius < kStationarityBound;
    if (!stationary && policy == Stationarity::rescale) {
      scale_roots(spec, kRescaledRadius / radius);
      stationary = true;
    }
  }
  if (!stationary) {
    throw GenerationError("sample_coefficients: no stationary AR draw in " + std::to_string(max_draws) +
                          " attempts (dim " + std::to_string(dim) + ", p " + std::to_string(p) + ")");
  }
  spec.theta.assign(q, Matrix(dim, dim));
  for (Matrix& m : spec.theta)
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = uniform(rng, -0.5, 0.5);
  return spec;
}

Matrix simulate_varma(const VarmaSpec& spec, std::size_t steps, Rng& rng) {
  if (steps == 0) throw ContractError("simulate_varma: need at least one step");
  spec.validate();
  const Matrix chol = cholesky(spec.sigma);
  const std::size_t d = spec.dim;
  const std::size_t total = spec.burn_in + steps;
  Matrix z(total, d);
  Matrix g(total, d);
  std::vector<double> draw(d);
  for (std::size_t t = 0; t < total; ++t) {
    for (double& v : draw) v = standard_normal(rng);
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += chol(i, k) * draw[k];
      g(t, i) = s;
    }
    for (std::size_t i = 0; i < d; ++i) {
      double s = g(t, i);
      for (std::size_t lag = 1; lag <= spec.p() && lag <= t; ++lag)
        for (std::size_t j = 0; j < d; ++j) s += spec.phi[lag - 1](i, j) * z(t - lag, j);
      for (std::size_t lag = 1; lag <= spec.q() && lag <= t; ++lag)
        for (std::size_t j = 0; j < d; ++j) s -= spec.theta[lag - 1](i, j) * g(t - lag, j);
      z(t, i) = s;
    }
  }
  Matrix out(steps, d);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < d; ++i) out(t, i) = z(spec.burn_in + t, i);
  return out;
}

SimCase sim_case(int case_id) {
  switch (case_id) {
    case 1: return {1, 100, 4, 5, 0, true};
    case 2: return {2, 1000, 4, 5, 0, true};
    case 3: return {3, 100, 4, 5, 5, true};
    case 4: return {4, 100, 4, 5, 5, false};
    default: throw ContractError("unknown simulation case " + std::to_string(case_id) + " (expected 1..4)");
  }
}

std::vector<std::string> monthly_dates(std::size_t count) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04zu-%02zu-01", 2000 + i / 12, 1 + i % 12);
    out.emplace_back(buf);
  }
  return out;
}

TimeSeriesPanel compose_case(const SimCase& sim, Rng& rng) {
  constexpr std::size_t kOrder = 3;
  TimeSeriesPanel panel;
  panel.dates = monthly_dates(sim.n_obs);
  for (std::size_t c = 0; c < sim.n_exog; ++c) panel.exog_names.push_back("x" + std::to_string(c + 1));
  for (std::size_t c = 0; c < sim.n_noise_exog; ++c) panel.exog_names.push_back("n" + std::to_string(c + 1));

  for (std::size_t s = 0; s < sim.n_mts; ++s) {
    const VarmaSpec spec = sample_coefficients(1 + sim.n_exog, kOrder, kOrder, rng, Stationarity::rescale);
    const Matrix z = simulate_varma(spec, sim.n_obs, rng);
    Series series;
    series.id = "region" + std::to_string(s + 1);
    series.target.resize(sim.n_obs);
    series.exogenous.assign(sim.n_exog + sim.n_noise_exog, std::vector<double>(sim.n_obs));
    for (std::size_t t = 0; t < sim.n_obs; ++t) {
      series.target[t] = z(t, 0);
      for (std::size_t c = 0; c < sim.n_exog; ++c) series.exogenous[c][t] = z(t, 1 + c);
    }
    for (std::size_t c = 0; c < sim.n_noise_exog; ++c)
      for (std::size_t t = 0; t < sim.n_obs; ++t) series.exogenous[sim.n_exog + c][t] = standard_normal(rng);
    panel.series.push_back(std::move(series));
  }

  if (sim.targets_correlated) {
    const VarmaSpec spatial = sample_coefficients(sim.n_mts, kOrder, kOrder, rng, Stationarity::rescale);
    const Matrix w = simulate_varma(spatial, sim.n_obs, rng);
    for (std::size_t s = 0; s < sim.n_mts; ++s)
      for (std::size_t t = 0; t < sim.n_obs; ++t) panel.series[s].target[t] += w(t, s);
  }
  panel.validate();
  return panel;
}

}  // namespace tsen
