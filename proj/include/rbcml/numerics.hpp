#pragma once

// Scalar special functions and quadrature rules shared by the model code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace rbcml::numerics {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// 1 / (1 + e^{-x}).
inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

namespace detail {
// 1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8, the Mills-ratio asymptotic series.
inline double mills_series(double z) {
  const double r = 1.0 / (z * z);
  return 1.0 + r * (-1.0 + r * (3.0 + r * (-15.0 + r * 105.0)));
}
inline constexpr double kTailSwitch = -35.0;
}  // namespace detail

inline double normal_log_cdf(double z) {
  if (z > 0) return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
  if (z > detail::kTailSwitch) return std::log(0.5 * std::erfc(-z * kInvSqrt2));
  return normal_log_pdf(z) - std::log(-z) + std::log(detail::mills_series(z));
}

// phi(z) / Phi(z), the derivative of log Phi.
inline double inverse_mills(double z) {
  if (z > detail::kTailSwitch) return normal_pdf(z) / normal_cdf(z);
  return -z / detail::mills_series(z);
}

// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline QuadratureRule gauss_legendre(std::size_t n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged node for the weight.
    double p0 = 1.0;
    double p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double kk = static_cast<double>(k);
      const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
      p0 = p1;
      p1 = p2;
    }
    dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.weights[i] = w;
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

inline const QuadratureRule& gauss_legendre_256() {
  static const QuadratureRule rule = gauss_legendre(256);
  return rule;
}

inline const QuadratureRule& gauss_legendre_16() {
  static const QuadratureRule rule = gauss_legendre(16);
  return rule;
}

template <class F>
double integrate(const QuadratureRule& rule, double lo, double hi, F&& f) {
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double sum = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    sum += rule.weights[k] * f(mid + half * rule.nodes[k]);
  }
  return half * sum;
}

// Tail integrals C_j = integral of f from x_j to x_{N-1} on a uniform grid
// with spacing h, using the fourth-order four-point panel rule.
inline std::vector<double> cumulative_from_right(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  std::vector<double> tail(n, 0.0);
  if (n < 4) {
    for (std::size_t j = n; j-- > 1;) tail[j - 1] = tail[j] + 0.5 * h * (f[j - 1] + f[j]);
    return tail;
  }
  const double c = h / 24.0;
  for (std::size_t j = n - 1; j-- > 0;) {
    double panel;
    if (j == 0) {
      panel = c * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
    } else if (j == n - 2) {
      panel = c * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]);
    } else {
      panel = c * (-f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2]);
    }
    tail[j] = tail[j + 1] + panel;
  }
  return tail;
}

// log of the integral of exp(log_integrand) over the real line, for
// log-concave integrands. Locates the mode by golden-section search, brackets
// the region within `depth` nats of the mode and applies composite 16-point
// Gauss-Legendre on 64 panels in the log domain.
inline double log_integral_log_concave(const std::function<double(double)>& log_integrand,
                                       double search_lo, double search_hi,
                                       double depth = 60.0) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = search_lo;
  double b = search_hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = log_integrand(c);
  double fd = log_integrand(d);
  for (int iter = 0; iter < 200 && (b - a) > 1e-10; ++iter) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = log_integrand(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = log_integrand(d);
    }
  }
  const double mode = 0.5 * (a + b);
  const double peak = log_integrand(mode);

  auto edge = [&](double direction) {
    double step = 1e-3;
    while (log_integrand(mode + direction * step) > peak - depth && step < 1e4) step *= 2.0;
    double inner = mode + direction * step * 0.5;
    double outer = mode + direction * step;
    for (int iter = 0; iter < 60; ++iter) {
      const double midpoint = 0.5 * (inner + outer);
      if (log_integrand(midpoint) > peak - depth) {
        inner = midpoint;
      } else {
        outer = midpoint;
      }
    }
    return outer;
  };
  const double lo = edge(-1.0);
  const double hi = edge(1.0);

  const QuadratureRule& rule = gauss_legendre_16();
  constexpr int kPanels = 64;
  const double width = (hi - lo) / kPanels;
  double sum = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double plo = lo + width * p;
    sum += integrate(rule, plo, plo + width,
                     [&](double x) { return std::exp(log_integrand(x) - peak); });
  }
  return peak + std::log(sum);
}

}  // namespace rbcml::numerics
