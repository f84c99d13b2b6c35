#pragma once

// Executable consistency theory: structural checks on (G, W) for
// Plackett-Luce and symmetric RUMs, the expected-gradient criterion, and an
// empirical MSE trend.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rbcml/breaking.hpp"
#include "rbcml/cml.hpp"
#include "rbcml/errors.hpp"
#include "rbcml/model.hpp"
#include "rbcml/parallel.hpp"
#include "rbcml/rng.hpp"
#include "rbcml/sampling.hpp"

namespace rbcml {

enum class ConsistencyReason {
  kNonPositionKUnion,
  kNonUniformG,
  kWNotConnected,
  kWNotSymmetric,
  kExpectedGradientNonzero,
};

inline std::string to_string(ConsistencyReason reason) {
  switch (reason) {
    case ConsistencyReason::kNonPositionKUnion: return "non-position-k-union";
    case ConsistencyReason::kNonUniformG: return "non-uniform-G";
    case ConsistencyReason::kWNotConnected: return "W-not-connected";
    case ConsistencyReason::kWNotSymmetric: return "W-not-symmetric";
    case ConsistencyReason::kExpectedGradientNonzero: return "expected-gradient-nonzero";
  }
  return "unknown";
}

struct ConsistencyVerdict {
  bool consistent = true;
  std::vector<ConsistencyReason> reasons;

  void add(ConsistencyReason reason) {
    consistent = false;
    reasons.push_back(reason);
  }
};

enum class FamilyClass { kPlackettLuce, kSymmetricRum };

// w_ij == w_ji (within tol) for every pair.
inline bool weights_symmetric(const CmlWeights& w, double tol = kShapeTolerance) {
  for (std::size_t i = 0; i < w.m(); ++i) {
    for (std::size_t j = i + 1; j < w.m(); ++j) {
      if (std::abs(w(i, j) - w(j, i)) > tol) return false;
    }
  }
  return true;
}

// Connectivity of the undirected graph whose edges are the pairs with
// min(w_ij, w_ji) > 0.
inline bool weights_connected(const CmlWeights& w) {
  const std::size_t m = w.m();
  std::vector<bool> seen(m, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t u = 0; u < m; ++u) {
      if (!seen[u] && u != v && std::min(w(v, u), w(u, v)) > 0.0) {
        seen[u] = true;
        ++count;
        stack.push_back(u);
      }
    }
  }
  return count == m;
}

namespace detail {
inline void check_weights_shape(const CmlWeights& w, ConsistencyVerdict& verdict, double tol) {
  if (!weights_connected(w)) verdict.add(ConsistencyReason::kWNotConnected);
  if (!weights_symmetric(w, tol)) verdict.add(ConsistencyReason::kWNotSymmetric);
}
}  // namespace detail

// Plackett-Luce: consistent iff G is a weighted union of position-k
// breakings and W is connected and symmetric.
inline ConsistencyVerdict check_consistency_pl(const BreakingGraph& g, const CmlWeights& w,
                                               double tol = kShapeTolerance) {
  if (g.m() != w.m()) throw DimensionMismatchError("breaking graph and weights disagree on m");
  ConsistencyVerdict verdict;
  if (!is_weighted_union_of_position_k(g, tol)) verdict.add(ConsistencyReason::kNonPositionKUnion);
  detail::check_weights_shape(w, verdict, tol);
  return verdict;
}

// Symmetric RUMs whose log-density derivative is decreasing and unbounded
// at -infinity (Gaussian qualifies): consistent iff G is uniform and W is
// connected and symmetric. That premise on the family is not checked here.
inline ConsistencyVerdict check_consistency_symmetric_rum(const BreakingGraph& g,
                                                          const CmlWeights& w,
                                                          double tol = kShapeTolerance) {
  if (g.m() != w.m()) throw DimensionMismatchError("breaking graph and weights disagree on m");
  ConsistencyVerdict verdict;
  if (!is_uniform(g, tol)) verdict.add(ConsistencyReason::kNonUniformG);
  detail::check_weights_shape(w, verdict, tol);
  return verdict;
}

inline ConsistencyVerdict check_consistency(FamilyClass family_class, const BreakingGraph& g,
                                            const CmlWeights& w, double tol = kShapeTolerance) {
  return family_class == FamilyClass::kPlackettLuce ? check_consistency_pl(g, w, tol)
                                                    : check_consistency_symmetric_rum(g, w, tol);
}

struct ExpectationOptions {
  bool monte_carlo = false;
  std::size_t samples = 200'000;
  std::uint64_t seed = 1;
};

// Gradient of the expected composite log-likelihood at the truth: cll_grad
// with kappa replaced by its expectation under theta0, evaluated at theta0.
inline Eigen::VectorXd expected_gradient(const UtilityFamily& family, const BreakingGraph& g,
                                         const CmlWeights& w, const Theta& theta0,
                                         const ExpectationOptions& opts = {}) {
  if (opts.monte_carlo) {
    const KappaEstimate estimate =
        expected_kappa_monte_carlo(g, family, theta0, opts.samples, opts.seed);
    return cll_grad(family, estimate.mean, w, theta0);
  }
  return cll_grad(family, expected_kappa(g, family, theta0), w, theta0);
}

inline constexpr double kExpectedGradientZero = 1e-8;
inline constexpr double kExpectedGradientNonzero = 1e-3;

enum class GradientClass { kZero, kNonzero, kIndeterminate };

struct GradientVerdict {
  GradientClass classification = GradientClass::kIndeterminate;
  double max_norm = 0.0;
  std::vector<double> norms;
};

// Classifies (G, W) by the largest expected-gradient norm over `truths`.
inline GradientVerdict classify_by_expected_gradient(const UtilityFamily& family,
                                                     const BreakingGraph& g, const CmlWeights& w,
                                                     const std::vector<Theta>& truths) {
  GradientVerdict verdict;
  for (const Theta& theta0 : truths) {
    const double norm = expected_gradient(family, g, w, theta0).norm();
    verdict.norms.push_back(norm);
    verdict.max_norm = std::max(verdict.max_norm, norm);
  }
  if (verdict.max_norm < kExpectedGradientZero) {
    verdict.classification = GradientClass::kZero;
  } else if (verdict.max_norm > kExpectedGradientNonzero) {
    verdict.classification = GradientClass::kNonzero;
  }
  return verdict;
}

// Mean squared error over the m-1 free coordinates.
inline double mse(const Theta& estimate, const Theta& truth) {
  if (estimate.size() != truth.size()) {
    throw DimensionMismatchError(
        fmt::format("estimate has m = {}, truth has m = {}", estimate.size(), truth.size()));
  }
  const Eigen::VectorXd diff = estimate.free() - truth.free();
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

struct TrendPoint {
  std::size_t n = 0;
  double mean_mse = 0.0;
  double mse_stderr = 0.0;
  std::size_t failures = 0;
  Eigen::VectorXd mean_estimate;
  Eigen::VectorXd estimate_stderr;
};

// Average MSE of RBCML(G, W) over `trials` simulated profiles for each n.
inline std::vector<TrendPoint> empirical_consistency_trend(
    const UtilityFamily& family, const BreakingGraph& g, const CmlWeights& w, const Theta& theta0,
    const std::vector<std::size_t>& n_grid, std::size_t trials, std::uint64_t seed,
    const FitOptions& fit = {}, std::size_t workers = 1) {
  if (trials < 1) throw DomainError("trials must be at least 1");
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    if (n_grid[k] < 1 || (k > 0 && n_grid[k] <= n_grid[k - 1])) {
      throw DomainError("n_grid must be positive and strictly increasing");
    }
  }
  const std::size_t m = theta0.size();
  std::vector<TrendPoint> points;
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    struct Outcome {
      bool ok = false;
      double mse = 0.0;
      Eigen::VectorXd estimate;
    };
    std::vector<Outcome> outcomes(trials);
    parallel_for(trials, workers, [&](std::size_t t) {
      SeededRng rng = SeededRng::derive(seed, k * trials + t);
      const Profile profile = sample_profile(family, theta0, n_grid[k], rng);
      try {
        const FitResult result =
            maximize_cll(family, kappa_stats(g, profile), w, Theta::zeros(m), fit);
        if (!result.converged) return;
        outcomes[t] = {true, mse(result.theta, theta0), result.theta.free()};
      } catch (const Error&) {
        // Counted as a failure below.
      }
    });

    TrendPoint point;
    point.n = n_grid[k];
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m - 1));
    Eigen::VectorXd sum_sq = sum;
    double mse_sum = 0.0;
    double mse_sq = 0.0;
    std::size_t ok = 0;
    for (const Outcome& o : outcomes) {
      if (!o.ok) {
        ++point.failures;
        continue;
      }
      ++ok;
      mse_sum += o.mse;
      mse_sq += o.mse * o.mse;
      sum += o.estimate;
      sum_sq += o.estimate.cwiseProduct(o.estimate);
    }
    if (ok > 0) {
      const double count = static_cast<double>(ok);
      point.mean_mse = mse_sum / count;
      point.mean_estimate = sum / count;
      if (ok > 1) {
        const double var = (mse_sq - count * point.mean_mse * point.mean_mse) / (count - 1.0);
        point.mse_stderr = std::sqrt(std::max(0.0, var) / count);
        const Eigen::VectorXd est_var =
            ((sum_sq - count * point.mean_estimate.cwiseProduct(point.mean_estimate)) / (count - 1.0))
                .cwiseMax(0.0);
        point.estimate_stderr = (est_var / count).cwiseSqrt();
      } else {
        point.estimate_stderr = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m - 1));
      }
    }
    points.push_back(std::move(point));
  }
  return points;
}

}  // namespace rbcml
