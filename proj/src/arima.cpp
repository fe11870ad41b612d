#include "tskd/arima.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "tskd/errors.hpp"

namespace tskd {

std::vector<double> difference(std::span<const double> series, int d) {
  if (d < 0) throw ContractError("difference: d must be >= 0");
  if (series.size() <= static_cast<std::size_t>(d)) {
    throw ContractError("difference: series of length " + std::to_string(series.size()) + " too short for d=" +
                        std::to_string(d));
  }
  std::vector<double> out(series.begin(), series.end());
  for (int k = 0; k < d; ++k) {
    for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
    out.pop_back();
  }
  return out;
}

std::vector<double> difference_heads(std::span<const double> series, int d) {
  std::vector<double> heads;
  std::vector<double> level(series.begin(), series.end());
  for (int k = 0; k < d; ++k) {
    heads.push_back(level.at(0));
    level = difference(level, 1);
  }
  return heads;
}

std::vector<double> integrate(std::span<const double> differenced, std::span<const double> heads) {
  std::vector<double> level(differenced.begin(), differenced.end());
  for (std::size_t k = heads.size(); k-- > 0;) {
    std::vector<double> up{heads[k]};
    for (double v : level) up.push_back(up.back() + v);
    level = std::move(up);
  }
  return level;
}

bool ar_stationary(std::span<const double> phi) {
  const auto p = static_cast<Eigen::Index>(phi.size());
  if (p == 0) return true;
  // Companion eigenvalues are the reciprocals of the polynomial roots.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) companion(0, j) = phi[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (std::abs(es.eigenvalues()(i)) >= 1.0) return false;
  }
  return true;
}

std::vector<double> css_residuals(const ArimaModel& m, std::span<const double> w) {
  const std::size_t n = w.size();
  const auto p = static_cast<std::size_t>(m.p);
  std::vector<double> e(n, 0.0);
  for (std::size_t t = p; t < n; ++t) {
    double v = w[t] - m.intercept;
    for (std::size_t i = 1; i <= p; ++i) v -= m.phi[i - 1] * w[t - i];
    for (std::size_t j = 1; j <= m.theta.size() && j <= t; ++j) v -= m.theta[j - 1] * e[t - j];
    e[t] = v;
  }
  return e;
}

namespace {

double sse_from(const std::vector<double>& e, std::size_t p) {
  double s = 0;
  for (std::size_t t = p; t < e.size(); ++t) s += e[t] * e[t];
  return s;
}

void require_full_rank(const Eigen::MatrixXd& x, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    throw DegenerateFitError(std::string("fit_arima: singular regressor matrix in ") + what + " (rank " +
                             std::to_string(qr.rank()) + " of " + std::to_string(x.cols()) +
                             "); the differenced series is constant or collinear");
  }
}

// Pack order: [c?, phi_1..phi_p, theta_1..theta_q].
Eigen::VectorXd pack(const ArimaModel& m) {
  const Eigen::Index nc = m.has_intercept ? 1 : 0;
  Eigen::VectorXd beta(nc + m.p + m.q);
  if (nc) beta(0) = m.intercept;
  for (int i = 0; i < m.p; ++i) beta(nc + i) = m.phi[static_cast<std::size_t>(i)];
  for (int j = 0; j < m.q; ++j) beta(nc + m.p + j) = m.theta[static_cast<std::size_t>(j)];
  return beta;
}

void unpack(ArimaModel& m, const Eigen::VectorXd& beta) {
  const Eigen::Index nc = m.has_intercept ? 1 : 0;
  if (nc) m.intercept = beta(0);
  for (int i = 0; i < m.p; ++i) m.phi[static_cast<std::size_t>(i)] = beta(nc + i);
  for (int j = 0; j < m.q; ++j) m.theta[static_cast<std::size_t>(j)] = beta(nc + m.p + j);
}

// Jacobian of the conditional residuals by the recursion
//   de_t/db = -x_t - sum_j theta_j de_{t-j}/db
Eigen::MatrixXd css_jacobian(const ArimaModel& m, std::span<const double> w, const std::vector<double>& e) {
  const std::size_t n = w.size(), p = static_cast<std::size_t>(m.p);
  const Eigen::Index nc = m.has_intercept ? 1 : 0;
  const Eigen::Index cols = nc + m.p + m.q;
  Eigen::MatrixXd de = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), cols);
  for (std::size_t t = p; t < n; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    if (nc) de(row, 0) = -1.0;
    for (std::size_t i = 1; i <= p; ++i) de(row, nc + static_cast<Eigen::Index>(i) - 1) = -w[t - i];
    for (std::size_t j = 1; j <= static_cast<std::size_t>(m.q); ++j) {
      if (j <= t) de(row, nc + m.p + static_cast<Eigen::Index>(j) - 1) = -e[t - j];
    }
    for (std::size_t j = 1; j <= static_cast<std::size_t>(m.q) && j <= t; ++j) {
      de.row(row) -= m.theta[j - 1] * de.row(static_cast<Eigen::Index>(t - j));
    }
  }
  return de.bottomRows(static_cast<Eigen::Index>(n - p));
}

}  // namespace

ArimaModel fit_arima(std::span<const double> series, int p, int d, int q) {
  if (p < 0 || d < 0 || q < 0) throw ContractError("fit_arima: orders must be >= 0");
  const std::size_t need = static_cast<std::size_t>(p + d + q + 10);
  if (series.size() < need) {
    throw ContractError("fit_arima: need at least " + std::to_string(need) + " observations, got " +
                        std::to_string(series.size()));
  }
  for (double v : series) {
    if (!std::isfinite(v)) throw ContractError("fit_arima: series contains non-finite values");
  }
  const auto w = difference(series, d);
  ArimaModel m;
  m.p = p;
  m.d = d;
  m.q = q;
  m.has_intercept = d == 0;
  m.phi.assign(static_cast<std::size_t>(p), 0.0);
  m.theta.assign(static_cast<std::size_t>(q), 0.0);

  const std::size_t n = w.size(), up = static_cast<std::size_t>(p);
  const Eigen::Index nc = m.has_intercept ? 1 : 0;
  const Eigen::Index rows = static_cast<Eigen::Index>(n - up);
  if (nc + p > 0) {
    Eigen::MatrixXd x(rows, nc + p);
    Eigen::VectorXd y(rows);
    for (std::size_t t = up; t < n; ++t) {
      const auto r = static_cast<Eigen::Index>(t - up);
      if (nc) x(r, 0) = 1.0;
      for (std::size_t i = 1; i <= up; ++i) x(r, nc + static_cast<Eigen::Index>(i) - 1) = w[t - i];
      y(r) = w[t];
    }
    require_full_rank(x, "the autoregression");
    Eigen::VectorXd b = x.colPivHouseholderQr().solve(y);
    if (nc) m.intercept = b(0);
    for (std::size_t i = 0; i < up; ++i) m.phi[i] = b(nc + static_cast<Eigen::Index>(i));
  }

  auto e = css_residuals(m, w);
  if (q > 0) {
    // Steps may not leave the stationary/invertible region once inside it.
    auto admissible = [](const ArimaModel& c) {
      std::vector<double> neg(c.theta.size());
      for (std::size_t j = 0; j < neg.size(); ++j) neg[j] = -c.theta[j];
      return ar_stationary(c.phi) && ar_stationary(neg);
    };
    const bool constrain = admissible(m);
    double sse = sse_from(e, up);
    for (int it = 0; it < 200; ++it) {
      const Eigen::MatrixXd jac = css_jacobian(m, w, e);
      if (it == 0) require_full_rank(jac, "the moving-average Jacobian");
      Eigen::VectorXd r(rows);
      for (std::size_t t = up; t < n; ++t) r(static_cast<Eigen::Index>(t - up)) = e[t];
      const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-r);
      const Eigen::VectorXd beta = pack(m);
      bool improved = false;
      double scale = 1.0;
      for (int half = 0; half < 30; ++half, scale *= 0.5) {
        ArimaModel trial = m;
        unpack(trial, beta + scale * step);
        if (constrain && !admissible(trial)) continue;
        auto te = css_residuals(trial, w);
        const double tsse = sse_from(te, up);
        if (std::isfinite(tsse) && tsse < sse) {
          m = std::move(trial);
          e = std::move(te);
          improved = sse - tsse > 1e-12 * std::max(1.0, sse);
          sse = tsse;
          break;
        }
      }
      m.iterations = it + 1;
      if (!improved) break;
    }
  }
  m.residuals = e;
  m.sigma2 = n > up ? sse_from(e, up) / static_cast<double>(n - up) : 0.0;
  m.stationary = ar_stationary(m.phi);
  return m;
}

std::vector<double> forecast(const ArimaModel& m, std::span<const double> history, int horizon) {
  if (horizon < 0) throw ContractError("forecast: horizon must be >= 0");
  if (horizon == 0) return {};
  if (history.size() < static_cast<std::size_t>(m.p + m.d) || history.size() <= static_cast<std::size_t>(m.d)) {
    throw ContractError("forecast: history too short for the model orders");
  }
  std::vector<double> w = difference(history, m.d);
  std::vector<double> e = css_residuals(m, w);
  for (int s = 0; s < horizon; ++s) {
    const std::size_t t = w.size();
    double v = m.intercept;
    for (std::size_t i = 1; i <= m.phi.size(); ++i) v += m.phi[i - 1] * (t >= i ? w[t - i] : 0.0);
    for (std::size_t j = 1; j <= m.theta.size(); ++j) v += m.theta[j - 1] * (t >= j ? e[t - j] : 0.0);
    w.push_back(v);
    e.push_back(0.0);
  }
  std::vector<double> ahead(w.end() - horizon, w.end());
  // Undo the differencing level by level, anchored on each level's last value.
  std::vector<std::vector<double>> levels{std::vector<double>(history.begin(), history.end())};
  for (int k = 1; k < m.d; ++k) levels.push_back(difference(levels.back(), 1));
  for (int k = m.d; k-- > 0;) {
    double last = levels[static_cast<std::size_t>(k)].back();
    for (double& v : ahead) {
      last += v;
      v = last;
    }
  }
  return ahead;
}

ArimaModel random_walk_model(std::span<const double> series) {
  ArimaModel m;
  m.d = 1;
  if (series.size() >= 2) {
    auto w = difference(series, 1);
    m.residuals = w;
    double s = 0;
    for (double v : w) s += v * v;
    m.sigma2 = s / static_cast<double>(w.size());
  }
  return m;
}

}  // namespace tskd
