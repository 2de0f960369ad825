#pragma once

// Test-only reference computations. Everything here works on plain doubles
// and never touches the tape, so it stays independent of the reverse-mode path.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

// Central differences of a scalar function of a parameter vector.
inline std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                                      std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Central-difference Jacobian of a vector map R^n -> R^m (m x n).
inline Eigen::MatrixXd finite_difference_jacobian(
    const std::function<std::vector<double>(std::span<const double>)>& f, std::vector<double> x, double h = 1e-5) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto m = static_cast<Eigen::Index>(f(x).size());
  Eigen::MatrixXd jac(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double saved = x[j];
    x[j] = saved + h;
    const auto up = f(x);
    x[j] = saved - h;
    const auto down = f(x);
    x[j] = saved;
    for (Eigen::Index i = 0; i < m; ++i) jac(i, j) = (up[i] - down[i]) / (2.0 * h);
  }
  return jac;
}

inline double log_abs_det(const Eigen::MatrixXd& m) {
  return std::log(std::abs(m.fullPivLu().determinant()));
}

// |a - b| relative to the larger magnitude, floored so that gradients that are
// zero up to differencing noise do not blow the ratio up.
inline double relative_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i], floor));
  return worst;
}

}  // namespace oracle

namespace oracle {

// Inverts one radial layer by bisection on the radius. The layer keeps the
// direction from z0 and maps radius r to r + beta r / (alpha + r), which is
// increasing when beta >= -alpha.
inline std::vector<double> radial_inverse(std::span<const double> z0, double alpha, double beta,
                                          std::span<const double> y) {
  const std::size_t d = y.size();
  double rho = 0;
  for (std::size_t i = 0; i < d; ++i) rho += (y[i] - z0[i]) * (y[i] - z0[i]);
  rho = std::sqrt(rho);
  if (rho == 0.0) return {y.begin(), y.end()};
  double lo = 0.0, hi = rho + std::abs(beta) + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = mid + beta * mid / (alpha + mid);
    (g < rho ? lo : hi) = mid;
  }
  const double r = 0.5 * (lo + hi);
  std::vector<double> z(d);
  for (std::size_t i = 0; i < d; ++i) z[i] = z0[i] + (r / rho) * (y[i] - z0[i]);
  return z;
}

}  // namespace oracle
