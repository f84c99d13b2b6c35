#pragma once

// Adaptive RBCML: alternate between choosing (G, W) from the current
// estimate and re-maximizing the composite likelihood, warm started.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "rbcml/breaking.hpp"
#include "rbcml/cml.hpp"
#include "rbcml/errors.hpp"
#include "rbcml/model.hpp"

namespace rbcml {

using BreakingHeuristic = std::function<BreakingGraph(const Theta&)>;
using WeightHeuristic = std::function<CmlWeights(const Theta&)>;

inline BreakingHeuristic constant_breaking(BreakingGraph g) {
  return [g = std::move(g)](const Theta&) { return g; };
}

inline WeightHeuristic constant_weights(CmlWeights w) {
  return [w = std::move(w)](const Theta&) { return w; };
}

// w_ij = w_ji = 1 / (|theta_i - theta_j| + 4): closer pairs weigh more.
inline CmlWeights heuristic_w_pl(const Theta& theta) {
  const auto m = static_cast<Eigen::Index>(theta.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i != j) w(i, j) = 1.0 / (std::abs(theta.values()[i] - theta.values()[j]) + 4.0);
    }
  }
  return CmlWeights(std::move(w));
}

struct AdaptiveConfig {
  std::size_t iterations = 1;
  BreakingHeuristic breaking;
  WeightHeuristic weights;
  FitOptions fit;
};

// Uniform breaking with the distance heuristic for W, two rounds.
inline AdaptiveConfig default_pl_config(std::size_t m) {
  return {2, constant_breaking(uniform_breaking(m)), heuristic_w_pl, {}};
}

// One round of RBCML(G_u, W_u).
inline AdaptiveConfig default_gaussian_config(std::size_t m) {
  return {1, constant_breaking(uniform_breaking(m)), constant_weights(uniform_weights(m)), {}};
}

struct AdaptiveResult {
  std::vector<FitResult> iterates;
  bool completed = false;
  std::string failure;
  // Number of times kappa was computed from the profile.
  std::size_t kappa_evaluations = 0;

  const FitResult& final_fit() const {
    if (iterates.empty()) throw Error("adaptive RBCML produced no iterate: " + failure);
    return iterates.back();
  }
};

inline constexpr double kGraphChangeTolerance = 1e-12;

// Starts from theta = 0; iteration t builds G and W from the previous
// estimate and maximizes the composite likelihood from that estimate.
// Kappa is recomputed only when the breaking graph changes. A failed
// iteration stops the loop; the iterates so far are returned.
inline AdaptiveResult adaptive_rbcml(const Profile& profile, const AdaptiveConfig& cfg,
                                     const UtilityFamily& family) {
  if (cfg.iterations < 1) throw DomainError("adaptive RBCML needs at least one iteration");
  if (!cfg.breaking || !cfg.weights) throw DomainError("adaptive RBCML needs both heuristics");
  const std::size_t m = profile.m();
  AdaptiveResult result;
  Theta current = Theta::zeros(m);
  std::optional<BreakingGraph> last_graph;
  std::optional<KappaMatrix> kappa;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    try {
      BreakingGraph g = cfg.breaking(current);
      CmlWeights w = cfg.weights(current);
      if (g.m() != m || w.m() != m) {
        throw DimensionMismatchError("heuristic output does not match the profile's m");
      }
      if (!last_graph || !last_graph->approx_equal(g, kGraphChangeTolerance)) {
        kappa = kappa_stats(g, profile);
        ++result.kappa_evaluations;
        last_graph = std::move(g);
      }
      FitResult fit = maximize_cll(family, *kappa, w, current, cfg.fit);
      current = fit.theta;
      const bool converged = fit.converged;
      result.iterates.push_back(std::move(fit));
      if (!converged) {
        result.failure = fmt::format("iteration {} did not converge", t + 1);
        return result;
      }
    } catch (const Error& e) {
      result.failure = fmt::format("iteration {}: {}", t + 1, e.what());
      return result;
    }
  }
  result.completed = true;
  return result;
}

}  // namespace rbcml
