#pragma once

#include <cstddef>
#include <vector>

#include "tsen/matrix.hpp"
#include "tsen/panel.hpp"
#include "tsen/rng.hpp"

namespace tsen {

struct VarmaSpec {
  std::size_t dim = 1;
  std::vector<Matrix> phi;    // AR lags 1..p, each (dim x dim)
  std::vector<Matrix> theta;  // MA lags 1..q, each (dim x dim)
  Matrix sigma;               // innovation covariance
  std::size_t burn_in = 200;

  std::size_t p() const noexcept { return phi.size(); }
  std::size_t q() const noexcept { return theta.size(); }

  /// Checks lag shapes and that sigma is square. Throws ShapeError.
  void validate() const;
};

/// Stacked-lag companion matrix of the AR part, (dim*p x dim*p).
Matrix companion(const VarmaSpec& spec);

inline constexpr double kStationarityBound = 0.95;
inline constexpr double kRescaledRadius = 0.9;
inline constexpr int kMaxCoefficientDraws = 1000;

enum class Stationarity {
  reject,   // redraw the AR block until it is stationary
  rescale,  // one draw; if needed scale phi_i by c^i so the radius becomes kRescaledRadius
};

/// AR entries ~ U(-0.5, 0.5), made stationary (companion spectral radius
/// below kStationarityBound) per `policy`; MA matrices diagonal with
/// U(-0.5, 0.5) entries; sigma has 2 on the diagonal and 0.7 elsewhere.
/// Under `reject`, throws GenerationError when no stationary draw is found
/// within `max_draws` attempts.
VarmaSpec sample_coefficients(std::size_t dim, std::size_t p, std::size_t q, Rng& rng,
                              Stationarity policy = Stationarity::reject, int max_draws = kMaxCoefficientDraws);

/// Scales phi_i by c^i, which multiplies every companion eigenvalue by c.
void scale_roots(VarmaSpec& spec, double c);

/// T rows of Z_t = sum_i phi_i Z_{t-i} + G_t - sum_j theta_j G_{t-j} with
/// G_t ~ N(0, sigma), zero pre-sample values and burn_in discarded steps.
/// Throws NumericError when sigma is not positive definite.
Matrix simulate_varma(const VarmaSpec& spec, std::size_t steps, Rng& rng);

struct SimCase {
  int case_id = 1;
  std::size_t n_obs = 100;
  std::size_t n_mts = 4;
  std::size_t n_exog = 5;
  std::size_t n_noise_exog = 0;
  bool targets_correlated = true;
};

/// The four simulation settings. Throws ContractError for ids outside 1..4.
SimCase sim_case(int case_id);

/// Panel of n_mts series "region1".. with exogenous columns x1..x5 and, when
/// present, noise columns n1..n5, dated monthly from 2000-01-01.
TimeSeriesPanel compose_case(const SimCase& sim, Rng& rng);

/// Monthly ISO dates starting at 2000-01-01.
std::vector<std::string> monthly_dates(std::size_t count);

}  // namespace tsen
