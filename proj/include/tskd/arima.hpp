#pragma once

#include <span>
#include <string>
#include <vector>

namespace tskd {

struct ArimaModel {
  int p = 0, d = 0, q = 0;
  std::vector<double> phi;    // AR coefficients, lag 1 first
  std::vector<double> theta;  // MA coefficients, lag 1 first
  double intercept = 0;       // only estimated when d == 0
  bool has_intercept = false;
  double sigma2 = 0;
  bool stationary = true;  // AR roots outside the unit circle
  int iterations = 0;      // Gauss-Newton iterations (0 for OLS)
  std::vector<double> residuals;  // conditional residuals on the differenced series
};

/// d-fold first differencing; output length = input length - d.
std::vector<double> difference(std::span<const double> series, int d);

/// First value of every differencing level (y_0, (dy)_0, ...), enough to undo
/// `difference`.
std::vector<double> difference_heads(std::span<const double> series, int d);
std::vector<double> integrate(std::span<const double> differenced, std::span<const double> heads);

/// OLS when q == 0, conditional sum of squares by Gauss-Newton otherwise.
/// Requires len >= p + d + q + 10. Throws DegenerateFitError when the
/// regressors are rank deficient (e.g. a constant series with p > 0).
ArimaModel fit_arima(std::span<const double> series, int p, int d, int q);

/// Conditional residuals of `model` on an already differenced series.
std::vector<double> css_residuals(const ArimaModel& model, std::span<const double> differenced);

/// Iterates the fitted recursion with future innovations set to zero and
/// undoes the differencing. horizon == 0 yields an empty forecast.
std::vector<double> forecast(const ArimaModel& model, std::span<const double> history, int horizon);

/// ARIMA(0,1,0) without drift; forecasts the last observed value.
ArimaModel random_walk_model(std::span<const double> series);

/// True when every root of 1 - phi_1 z - ... - phi_p z^p lies outside the unit circle.
bool ar_stationary(std::span<const double> phi);

}  // namespace tskd
