#pragma once

// Random utility location families: parameters, rankings, pairwise and full
// ranking probabilities, and the log-concavity probe.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "rbcml/errors.hpp"
#include "rbcml/numerics.hpp"
#include "rbcml/rng.hpp"

namespace rbcml {

// Location parameters with the gauge fixed so that the last entry is 0.
// Every constructor re-gauges by subtracting the last entry.
class Theta {
 public:
  Theta() = default;

  explicit Theta(Eigen::VectorXd values) : values_(std::move(values)) {
    if (values_.size() < 2) throw DomainError("Theta needs at least two alternatives");
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw DomainError(fmt::format("Theta entry {} is not finite", i));
      }
    }
    values_.array() -= values_[values_.size() - 1];
    values_[values_.size() - 1] = 0.0;
  }

  Theta(std::initializer_list<double> values)
      : Theta(Eigen::Map<const Eigen::VectorXd>(values.begin(),
                                                 static_cast<Eigen::Index>(values.size()))) {}

  static Theta zeros(std::size_t m) { return Theta(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))); }

  // Builds a Theta from its m-1 free coordinates.
  static Theta from_free(const Eigen::VectorXd& free) {
    Eigen::VectorXd full(free.size() + 1);
    full.head(free.size()) = free;
    full[free.size()] = 0.0;
    return Theta(std::move(full));
  }

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd free() const { return values_.head(values_.size() - 1); }

  friend bool operator==(const Theta& a, const Theta& b) { return a.values_ == b.values_; }

 private:
  Eigen::VectorXd values_;
};

enum class FamilyKind { kPlackettLuce, kGaussian, kCustomSymmetric };

// Shape of the utility noise. Plackett-Luce uses standard Gumbel noise,
// Gaussian uses N(0, scale_i^2), and custom families supply a symmetric,
// everywhere-positive density together with its CDF.
class UtilityFamily {
 public:
  static UtilityFamily plackett_luce() { return UtilityFamily(FamilyKind::kPlackettLuce); }

  // Empty `scales` means unit scale for every alternative.
  static UtilityFamily gaussian(std::vector<double> scales = {}) {
    for (double s : scales) {
      if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("Gaussian scales must be positive");
    }
    UtilityFamily family(FamilyKind::kGaussian);
    family.scales_ = std::move(scales);
    return family;
  }

  static UtilityFamily custom_symmetric(std::function<double(double)> density,
                                        std::function<double(double)> cdf,
                                        double scale = 1.0) {
    if (!(scale > 0.0)) throw DomainError("custom family scale must be positive");
    for (int k = 0; k <= 200; ++k) {
      const double x = scale * (-10.0 + 0.1 * k);
      const double left = density(-x);
      const double right = density(x);
      if (!(left > 0.0) || !(right > 0.0) || !std::isfinite(left)) {
        throw DomainError(fmt::format(
            "custom density must be positive everywhere; got {} at x = {}", right, x));
      }
      if (std::abs(left - right) > 1e-12 * std::max(1.0, right)) {
        throw DomainError(fmt::format("custom density is not symmetric at x = {}", x));
      }
    }
    UtilityFamily family(FamilyKind::kCustomSymmetric);
    family.density_ = std::move(density);
    family.cdf_ = std::move(cdf);
    family.custom_scale_ = scale;
    double half_width = 10.0 * scale;
    while (family.cdf_(-half_width) > 1e-15 && half_width < 1000.0 * scale) half_width *= 2.0;
    family.custom_half_width_ = half_width;
    return family;
  }

  FamilyKind kind() const { return kind_; }
  bool is_plackett_luce() const { return kind_ == FamilyKind::kPlackettLuce; }
  bool is_symmetric() const { return kind_ != FamilyKind::kPlackettLuce; }

  std::string name() const {
    switch (kind_) {
      case FamilyKind::kPlackettLuce: return "pl";
      case FamilyKind::kGaussian: return "gaussian";
      case FamilyKind::kCustomSymmetric: return "custom-symmetric";
    }
    return "unknown";
  }

  const std::vector<double>& gaussian_scales() const { return scales_; }

  // Throws unless the family can describe m alternatives.
  void check_dimension(std::size_t m) const {
    if (kind_ == FamilyKind::kGaussian && !scales_.empty() && scales_.size() != m) {
      throw DimensionMismatchError(
          fmt::format("Gaussian family has {} scales but m = {}", scales_.size(), m));
    }
  }

  double scale(std::size_t i) const {
    if (kind_ == FamilyKind::kGaussian) return scales_.empty() ? 1.0 : scales_.at(i);
    if (kind_ == FamilyKind::kCustomSymmetric) return custom_scale_;
    return 1.0;
  }

  // Half-width around the location beyond which the noise mass is negligible.
  double tail_half_width() const {
    switch (kind_) {
      case FamilyKind::kPlackettLuce: return 40.0;
      case FamilyKind::kGaussian: {
        double widest = 1.0;
        if (!scales_.empty()) widest = *std::max_element(scales_.begin(), scales_.end());
        return 10.0 * widest;
      }
      case FamilyKind::kCustomSymmetric: return custom_half_width_;
    }
    return 10.0;
  }

  double smallest_scale() const {
    if (kind_ == FamilyKind::kGaussian && !scales_.empty()) {
      return *std::min_element(scales_.begin(), scales_.end());
    }
    return scale(0);
  }

  // Centered noise of alternative i.
  double noise_density(std::size_t i, double x) const {
    switch (kind_) {
      case FamilyKind::kPlackettLuce: return std::exp(-x - std::exp(-x));
      case FamilyKind::kGaussian: {
        const double s = scale(i);
        return numerics::normal_pdf(x / s) / s;
      }
      case FamilyKind::kCustomSymmetric: return density_(x);
    }
    return 0.0;
  }

  double noise_log_density(std::size_t i, double x) const {
    switch (kind_) {
      case FamilyKind::kPlackettLuce: return -x - std::exp(-x);
      case FamilyKind::kGaussian: {
        const double s = scale(i);
        return numerics::normal_log_pdf(x / s) - std::log(s);
      }
      case FamilyKind::kCustomSymmetric: return std::log(density_(x));
    }
    return 0.0;
  }

  double noise_cdf(std::size_t i, double x) const {
    switch (kind_) {
      case FamilyKind::kPlackettLuce: return std::exp(-std::exp(-x));
      case FamilyKind::kGaussian: return numerics::normal_cdf(x / scale(i));
      case FamilyKind::kCustomSymmetric: return cdf_(x);
    }
    return 0.0;
  }

  double noise_log_cdf(std::size_t i, double x) const {
    switch (kind_) {
      case FamilyKind::kPlackettLuce: return -std::exp(-x);
      case FamilyKind::kGaussian: return numerics::normal_log_cdf(x / scale(i));
      case FamilyKind::kCustomSymmetric: return std::log(cdf_(x));
    }
    return 0.0;
  }

  // 1 - CDF, computed without cancellation.
  double noise_survival(std::size_t i, double x) const {
    switch (kind_) {
      case FamilyKind::kPlackettLuce: return -std::expm1(-std::exp(-x));
      case FamilyKind::kGaussian: return numerics::normal_cdf(-x / scale(i));
      case FamilyKind::kCustomSymmetric: return cdf_(-x);
    }
    return 0.0;
  }

  // One centered noise draw for alternative i.
  double sample_noise(std::size_t i, SeededRng& rng) const {
    switch (kind_) {
      case FamilyKind::kPlackettLuce: return rng.gumbel();
      case FamilyKind::kGaussian: return scale(i) * rng.normal();
      case FamilyKind::kCustomSymmetric: {
        // Inverse CDF by bisection.
        const double u = rng.uniform_open();
        double lo = -custom_half_width_;
        double hi = custom_half_width_;
        for (int iter = 0; iter < 100; ++iter) {
          const double mid = 0.5 * (lo + hi);
          (cdf_(mid) < u ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
      }
    }
    return 0.0;
  }

 private:
  explicit UtilityFamily(FamilyKind kind) : kind_(kind) {}

  FamilyKind kind_;
  std::vector<double> scales_;
  std::function<double(double)> density_;
  std::function<double(double)> cdf_;
  double custom_scale_ = 1.0;
  double custom_half_width_ = 10.0;
};

// A full ranking of m alternatives, top first (0-based alternative indices).
class Ranking {
 public:
  Ranking() = default;

  explicit Ranking(std::vector<std::size_t> order) : order_(std::move(order)) {
    std::vector<bool> seen(order_.size(), false);
    for (std::size_t a : order_) {
      if (a >= order_.size() || seen[a]) {
        throw InvariantError("ranking is not a permutation of the alternatives");
      }
      seen[a] = true;
    }
  }

  Ranking(std::initializer_list<std::size_t> order)
      : Ranking(std::vector<std::size_t>(order)) {}

  std::size_t size() const { return order_.size(); }
  std::size_t operator[](std::size_t position) const { return order_[position]; }
  const std::vector<std::size_t>& order() const { return order_; }

  // positions()[a] is the position of alternative a.
  std::vector<std::size_t> positions() const {
    std::vector<std::size_t> pos(order_.size());
    for (std::size_t k = 0; k < order_.size(); ++k) pos[order_[k]] = k;
    return pos;
  }

  Ranking reversed() const {
    return Ranking(std::vector<std::size_t>(order_.rbegin(), order_.rend()));
  }

  friend bool operator==(const Ranking&, const Ranking&) = default;

 private:
  std::vector<std::size_t> order_;
};

// n >= 1 rankings over the same m alternatives.
class Profile {
 public:
  Profile(std::size_t m, std::vector<Ranking> rankings)
      : m_(m), rankings_(std::move(rankings)) {
    if (m_ < 2) throw InvariantError("a profile needs at least two alternatives");
    if (rankings_.empty()) throw InvariantError("a profile needs at least one ranking");
    for (const Ranking& r : rankings_) {
      if (r.size() != m_) {
        throw DimensionMismatchError(
            fmt::format("ranking of length {} in a profile with m = {}", r.size(), m_));
      }
    }
  }

  std::size_t m() const { return m_; }
  std::size_t n() const { return rankings_.size(); }
  const std::vector<Ranking>& rankings() const { return rankings_; }
  const Ranking& operator[](std::size_t j) const { return rankings_[j]; }

  friend bool operator==(const Profile&, const Profile&) = default;

 private:
  std::size_t m_;
  std::vector<Ranking> rankings_;
};

// Every ranking of m alternatives in lexicographic order.
inline std::vector<Ranking> all_rankings(std::size_t m) {
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Ranking> out;
  do {
    out.emplace_back(order);
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

namespace detail {

inline void check_pair(const Theta& theta, std::size_t i, std::size_t j) {
  if (i >= theta.size() || j >= theta.size()) {
    throw InvalidPairError(fmt::format("pair ({}, {}) out of range for m = {}", i, j, theta.size()));
  }
  if (i == j) throw InvalidPairError(fmt::format("pair ({}, {}) has i == j", i, j));
}

// Pr(u_i > u_j) for a custom family by Gauss-Legendre quadrature:
// integral of density(u - theta_j) * (1 - CDF(u - theta_i)).
inline double custom_pairwise(const UtilityFamily& family, double theta_i, double theta_j) {
  const double hw = family.tail_half_width();
  const double lo = std::min(theta_i, theta_j) - hw;
  const double hi = std::max(theta_i, theta_j) + hw;
  return numerics::integrate(numerics::gauss_legendre_256(), lo, hi, [&](double u) {
    return family.noise_density(1, u - theta_j) * family.noise_survival(0, u - theta_i);
  });
}

// d/d theta_i of Pr(u_i > u_j) for a custom family: integral of the product of densities.
inline double custom_pairwise_derivative(const UtilityFamily& family, double theta_i,
                                         double theta_j) {
  const double hw = family.tail_half_width();
  const double lo = std::min(theta_i, theta_j) - hw;
  const double hi = std::max(theta_i, theta_j) + hw;
  return numerics::integrate(numerics::gauss_legendre_256(), lo, hi, [&](double u) {
    return family.noise_density(1, u - theta_j) * family.noise_density(0, u - theta_i);
  });
}

}  // namespace detail

// log p_ij and its first two derivatives with respect to theta_i (the
// theta_j derivatives are the negations). `second` is NaN when the family
// has no analytic second derivative.
struct PairLogTerms {
  double log_p;
  double first;
  double second;
};

inline PairLogTerms pair_log_terms(const UtilityFamily& family, const Theta& theta, std::size_t i,
                                   std::size_t j) {
  const double d = theta[i] - theta[j];
  switch (family.kind()) {
    case FamilyKind::kPlackettLuce: {
      const double p = numerics::logistic(d);
      const double q = numerics::logistic(-d);
      return {-numerics::softplus(-d), q, -p * q};
    }
    case FamilyKind::kGaussian: {
      const double si = family.scale(i);
      const double sj = family.scale(j);
      const double s = std::sqrt(si * si + sj * sj);
      const double z = d / s;
      const double lambda = numerics::inverse_mills(z);
      return {numerics::normal_log_cdf(z), lambda / s, -lambda * (z + lambda) / (s * s)};
    }
    case FamilyKind::kCustomSymmetric: {
      const double p = detail::custom_pairwise(family, theta[i], theta[j]);
      const double dp = detail::custom_pairwise_derivative(family, theta[i], theta[j]);
      return {std::log(p), dp / p, std::numeric_limits<double>::quiet_NaN()};
    }
  }
  return {0.0, 0.0, 0.0};
}

// Pr(a_i > a_j | theta).
inline double pairwise_prob(const UtilityFamily& family, const Theta& theta, std::size_t i,
                            std::size_t j) {
  detail::check_pair(theta, i, j);
  family.check_dimension(theta.size());
  const double d = theta[i] - theta[j];
  switch (family.kind()) {
    case FamilyKind::kPlackettLuce:
      return numerics::logistic(d);
    case FamilyKind::kGaussian: {
      const double si = family.scale(i);
      const double sj = family.scale(j);
      return numerics::normal_cdf(d / std::sqrt(si * si + sj * sj));
    }
    case FamilyKind::kCustomSymmetric:
      return detail::custom_pairwise(family, theta[i], theta[j]);
  }
  return 0.0;
}

// d Pr(a_i > a_j) / d theta_l.
inline double pairwise_prob_grad(const UtilityFamily& family, const Theta& theta, std::size_t i,
                                 std::size_t j, std::size_t l) {
  detail::check_pair(theta, i, j);
  family.check_dimension(theta.size());
  if (l >= theta.size()) throw InvalidPairError(fmt::format("index {} out of range", l));
  if (l != i && l != j) return 0.0;
  const double d = theta[i] - theta[j];
  double dp = 0.0;
  switch (family.kind()) {
    case FamilyKind::kPlackettLuce:
      dp = numerics::logistic(d) * numerics::logistic(-d);
      break;
    case FamilyKind::kGaussian: {
      const double si = family.scale(i);
      const double sj = family.scale(j);
      const double s = std::sqrt(si * si + sj * sj);
      dp = numerics::normal_pdf(d / s) / s;
      break;
    }
    case FamilyKind::kCustomSymmetric:
      dp = detail::custom_pairwise_derivative(family, theta[i], theta[j]);
      break;
  }
  return l == i ? dp : -dp;
}

// A probability together with its Monte-Carlo standard error (0 when exact
// or computed by quadrature).
struct ProbabilityEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct RankingProbOptions {
  std::size_t max_quadrature_m = 6;
  std::size_t monte_carlo_samples = 1'000'000;
  std::uint64_t monte_carlo_seed = 0x5eed;
};

// Pr(R | theta) by nested quadrature with sequential conditioning: the tail
// function A_k(x) = Pr(u_{r1} > ... > u_{rk} > x) is propagated down the
// ranking on a uniform grid. Works for every family.
inline double ranking_prob_quadrature(const UtilityFamily& family, const Theta& theta,
                                      const Ranking& r) {
  const std::size_t m = r.size();
  const double hw = family.tail_half_width();
  const double lo = theta.values().minCoeff() - hw;
  const double hi = theta.values().maxCoeff() + hw;
  const double step = family.smallest_scale() / 100.0;
  const auto points = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  const double h = (hi - lo) / static_cast<double>(points - 1);

  std::vector<double> tail(points);
  for (std::size_t p = 0; p < points; ++p) {
    const double x = lo + h * static_cast<double>(p);
    tail[p] = family.noise_survival(r[0], x - theta[r[0]]);
  }
  std::vector<double> integrand(points);
  for (std::size_t k = 1; k < m; ++k) {
    const std::size_t a = r[k];
    for (std::size_t p = 0; p < points; ++p) {
      const double x = lo + h * static_cast<double>(p);
      integrand[p] = family.noise_density(a, x - theta[a]) * tail[p];
    }
    tail = numerics::cumulative_from_right(integrand, h);
  }
  return tail[0];
}

// Pr(R | theta) by sampling utilities.
inline ProbabilityEstimate ranking_prob_monte_carlo(const UtilityFamily& family,
                                                    const Theta& theta, const Ranking& r,
                                                    std::size_t samples, std::uint64_t seed) {
  SeededRng rng(seed);
  const std::size_t m = r.size();
  std::vector<double> utility(m);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t a = 0; a < m; ++a) utility[a] = theta[a] + family.sample_noise(a, rng);
    bool ordered = true;
    for (std::size_t k = 0; k + 1 < m && ordered; ++k) {
      ordered = utility[r[k]] > utility[r[k + 1]];
    }
    hits += ordered ? 1 : 0;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(samples))};
}

inline double ranking_prob_pl(const Theta& theta, const Ranking& r) {
  const std::size_t m = r.size();
  double log_prob = 0.0;
  // Suffix log-sum-exp of theta over the remaining alternatives.
  double suffix = -std::numeric_limits<double>::infinity();
  std::vector<double> suffixes(m);
  for (std::size_t k = m; k-- > 0;) {
    suffix = numerics::log_sum_exp(suffix, theta[r[k]]);
    suffixes[k] = suffix;
  }
  for (std::size_t k = 0; k + 1 < m; ++k) log_prob += theta[r[k]] - suffixes[k];
  return std::exp(log_prob);
}

inline ProbabilityEstimate ranking_prob(const UtilityFamily& family, const Theta& theta,
                                        const Ranking& r, const RankingProbOptions& opts = {}) {
  if (r.size() != theta.size()) {
    throw DimensionMismatchError(
        fmt::format("ranking has {} alternatives, theta has {}", r.size(), theta.size()));
  }
  family.check_dimension(theta.size());
  if (family.is_plackett_luce()) return {ranking_prob_pl(theta, r), 0.0};
  if (r.size() <= opts.max_quadrature_m) return {ranking_prob_quadrature(family, theta, r), 0.0};
  return ranking_prob_monte_carlo(family, theta, r, opts.monte_carlo_samples,
                                  opts.monte_carlo_seed);
}

namespace detail {
inline void check_probe_grid(std::span<const double> grid) {
  if (grid.size() < 3) throw DomainError("log-concavity probe needs at least three grid points");
  const double h = grid[1] - grid[0];
  if (!(h > 0)) throw DomainError("probe grid must be strictly increasing");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double step = grid[k] - grid[k - 1];
    if (!(step > 0)) throw DomainError("probe grid must be strictly increasing");
    if (std::abs(step - h) > 1e-9 * std::max(1.0, std::abs(h))) {
      throw DomainError("probe grid must be uniformly spaced");
    }
  }
}
}  // namespace detail

// Worst (largest) second difference of log f over the interior grid points.
// Takes log f directly so that values of f below the double range still probe.
inline double log_concavity_probe_log(const std::function<double(double)>& log_f,
                                      std::span<const double> grid) {
  detail::check_probe_grid(grid);
  std::vector<double> values(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    values[k] = log_f(grid[k]);
    if (std::isnan(values[k]) || values[k] == -std::numeric_limits<double>::infinity()) {
      throw DomainError(fmt::format("function is not positive at x = {}", grid[k]));
    }
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
    worst = std::max(worst, values[k - 1] - 2.0 * values[k] + values[k + 1]);
  }
  return worst;
}

inline double log_concavity_probe(const std::function<double(double)>& f,
                                  std::span<const double> grid) {
  for (double x : grid) {
    if (!(f(x) > 0.0)) throw DomainError(fmt::format("function is not positive at x = {}", x));
  }
  return log_concavity_probe_log([&](double x) { return std::log(f(x)); }, grid);
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return grid;
}

// log of the self-convolution (f * f)(y) for a log-concave log density.
inline double log_self_convolution(const std::function<double(double)>& log_f, double y) {
  return numerics::log_integral_log_concave(
      [&](double x) { return log_f(y - x) + log_f(x); }, y - 200.0, y + 200.0);
}

}  // namespace rbcml
