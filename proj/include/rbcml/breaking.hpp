#pragma once

// Weighted rank-breaking graphs over ranking positions and the kappa
// statistics they deposit on ordered pairs of alternatives.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "rbcml/errors.hpp"
#include "rbcml/model.hpp"
#include "rbcml/rng.hpp"
#include "rbcml/sampling.hpp"

namespace rbcml {

inline constexpr double kShapeTolerance = 1e-9;
inline constexpr std::size_t kMaxExactEnumerationPl = 8;

// One undirected edge {k, l} between 0-based positions.
struct BreakingEdge {
  std::size_t k;
  std::size_t l;
  double weight;
};

// Weighted undirected graph over positions 0..m-1. Absent edges have weight 0.
class BreakingGraph {
 public:
  BreakingGraph(std::size_t m, const std::vector<BreakingEdge>& edges)
      : weights_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m))) {
    if (m < 2) throw InvariantError("a breaking graph needs at least two positions");
    for (const BreakingEdge& e : edges) {
      if (e.k >= m || e.l >= m || e.k == e.l) {
        throw InvalidPositionError(fmt::format("edge {{{}, {}}} is not a valid position pair for m = {}",
                                               e.k + 1, e.l + 1, m));
      }
      if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
        throw InvariantError(fmt::format("edge {{{}, {}}} has invalid weight {}", e.k + 1, e.l + 1, e.weight));
      }
      weights_(static_cast<Eigen::Index>(e.k), static_cast<Eigen::Index>(e.l)) += e.weight;
      weights_(static_cast<Eigen::Index>(e.l), static_cast<Eigen::Index>(e.k)) += e.weight;
    }
    if (!(weights_.maxCoeff() > 0.0)) throw InvariantError("a breaking graph needs a positive edge");
  }

  std::size_t m() const { return static_cast<std::size_t>(weights_.rows()); }

  double weight(std::size_t k, std::size_t l) const {
    return weights_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
  }

  // Symmetric m x m matrix with zero diagonal.
  const Eigen::MatrixXd& matrix() const { return weights_; }

  double total_weight() const { return 0.5 * weights_.sum(); }

  std::vector<BreakingEdge> edges() const {
    std::vector<BreakingEdge> out;
    for (std::size_t k = 0; k < m(); ++k) {
      for (std::size_t l = k + 1; l < m(); ++l) {
        if (weight(k, l) > 0.0) out.push_back({k, l, weight(k, l)});
      }
    }
    return out;
  }

  bool approx_equal(const BreakingGraph& other, double tol) const {
    return m() == other.m() && (weights_ - other.weights_).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  Eigen::MatrixXd weights_;
};

// Unit edges from position k (0-based) to every later position.
inline BreakingGraph position_k_breaking(std::size_t m, std::size_t k) {
  if (m < 2 || k + 1 >= m) {
    throw InvalidPositionError(fmt::format("position-k breaking needs 1 <= k <= m-1; got k = {}, m = {}", k + 1, m));
  }
  std::vector<BreakingEdge> edges;
  for (std::size_t l = k + 1; l < m; ++l) edges.push_back({k, l, 1.0});
  return BreakingGraph(m, edges);
}

inline BreakingGraph uniform_breaking(std::size_t m) {
  if (m < 2) throw InvariantError("uniform breaking needs m >= 2");
  std::vector<BreakingEdge> edges;
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t l = k + 1; l < m; ++l) edges.push_back({k, l, 1.0});
  }
  return BreakingGraph(m, edges);
}

inline BreakingGraph weighted_union(const std::vector<std::pair<double, BreakingGraph>>& terms) {
  if (terms.empty()) throw InvariantError("weighted union of no graphs");
  const std::size_t m = terms.front().second.m();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (const auto& [coefficient, g] : terms) {
    if (g.m() != m) throw DimensionMismatchError("weighted union of graphs with different m");
    if (!(coefficient >= 0.0)) throw InvariantError("weighted union coefficients must be nonnegative");
    sum += coefficient * g.matrix();
  }
  std::vector<BreakingEdge> edges;
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t l = k + 1; l < m; ++l) {
      const double w = sum(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      if (w > 0.0) edges.push_back({k, l, w});
    }
  }
  if (edges.empty()) throw InvariantError("weighted union is the empty graph");
  return BreakingGraph(m, edges);
}

// Per-ordered-pair comparison mass: entry (i, j) is the breaking weight
// deposited on "a_i beats a_j", averaged over rankings (kappa) or expected
// under the model (kappa-bar). Doubles as the directed comparison graph.
class KappaMatrix {
 public:
  explicit KappaMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) throw DimensionMismatchError("kappa matrix must be square");
    for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
      if (entries_(i, i) != 0.0) throw InvariantError("kappa matrix diagonal must be zero");
      for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
        if (!(entries_(i, j) >= 0.0) || !std::isfinite(entries_(i, j))) {
          throw InvariantError(fmt::format("kappa entry ({}, {}) is invalid", i, j));
        }
      }
    }
  }

  std::size_t m() const { return static_cast<std::size_t>(entries_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  double total() const { return entries_.sum(); }

  bool approx_equal(const KappaMatrix& other, double tol) const {
    return m() == other.m() && (entries_ - other.entries_).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  Eigen::MatrixXd entries_;
};

namespace detail {
// Adds the contribution of ranking r (scaled by `scale`) into `acc`.
inline void deposit(const BreakingGraph& g, const Ranking& r, double scale, Eigen::MatrixXd& acc) {
  const std::size_t m = r.size();
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t l = k + 1; l < m; ++l) {
      const double w = g.weight(k, l);
      if (w != 0.0) acc(static_cast<Eigen::Index>(r[k]), static_cast<Eigen::Index>(r[l])) += scale * w;
    }
  }
}
}  // namespace detail

inline KappaMatrix kappa_stats(const BreakingGraph& g, const Profile& p) {
  if (g.m() != p.m()) {
    throw DimensionMismatchError(fmt::format("breaking graph has m = {}, profile has m = {}", g.m(), p.m()));
  }
  const auto m = static_cast<Eigen::Index>(p.m());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
  for (const Ranking& r : p.rankings()) detail::deposit(g, r, 1.0, acc);
  acc /= static_cast<double>(p.n());
  return KappaMatrix(std::move(acc));
}

inline std::size_t max_exact_enumeration_m(const UtilityFamily& family) {
  return family.is_plackett_luce() ? kMaxExactEnumerationPl : RankingProbOptions{}.max_quadrature_m;
}

// Expected kappa by exact enumeration over all m! rankings.
inline KappaMatrix expected_kappa(const BreakingGraph& g, const UtilityFamily& family,
                                  const Theta& theta) {
  const std::size_t m = g.m();
  if (theta.size() != m) throw DimensionMismatchError("expected_kappa: theta and graph disagree on m");
  const std::size_t cap = max_exact_enumeration_m(family);
  if (m > cap) {
    throw TooLargeError(fmt::format(
        "exact expected kappa supports m <= {} for the {} family; use the Monte-Carlo mode", cap,
        family.name()));
  }
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (const Ranking& r : all_rankings(m)) {
    detail::deposit(g, r, ranking_prob(family, theta, r).value, acc);
  }
  return KappaMatrix(std::move(acc));
}

struct KappaEstimate {
  KappaMatrix mean;
  Eigen::MatrixXd std_error;
};

// Expected kappa estimated from `samples` simulated rankings.
inline KappaEstimate expected_kappa_monte_carlo(const BreakingGraph& g, const UtilityFamily& family,
                                                const Theta& theta, std::size_t samples,
                                                std::uint64_t seed) {
  const auto m = static_cast<Eigen::Index>(g.m());
  if (theta.size() != g.m()) throw DimensionMismatchError("expected_kappa: theta and graph disagree on m");
  if (samples < 2) throw DomainError("Monte-Carlo expected kappa needs at least two samples");
  SeededRng rng(seed);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd one = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t s = 0; s < samples; ++s) {
    one.setZero();
    detail::deposit(g, sample_ranking(family, theta, rng), 1.0, one);
    sum += one;
    sum_sq += one.cwiseProduct(one);
  }
  const double count = static_cast<double>(samples);
  Eigen::MatrixXd mean = sum / count;
  Eigen::MatrixXd variance = (sum_sq / count - mean.cwiseProduct(mean)) * (count / (count - 1.0));
  Eigen::MatrixXd se = (variance.cwiseMax(0.0) / count).cwiseSqrt();
  return {KappaMatrix(std::move(mean)), std::move(se)};
}

// Decomposes g into sum_k alpha_k * position_k_breaking when possible.
inline std::optional<std::vector<double>> is_weighted_union_of_position_k(
    const BreakingGraph& g, double tol = kShapeTolerance) {
  const std::size_t m = g.m();
  std::vector<double> alphas(m - 1);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double first = g.weight(k, k + 1);
    for (std::size_t l = k + 2; l < m; ++l) {
      if (std::abs(g.weight(k, l) - first) > tol) return std::nullopt;
    }
    alphas[k] = first;
  }
  return alphas;
}

inline bool is_uniform(const BreakingGraph& g, double tol = kShapeTolerance) {
  const double first = g.weight(0, 1);
  for (std::size_t k = 0; k < g.m(); ++k) {
    for (std::size_t l = k + 1; l < g.m(); ++l) {
      if (std::abs(g.weight(k, l) - first) > tol) return false;
    }
  }
  return true;
}

// Text format: first line m, then one "k l weight" line per edge with
// 1-based positions.
inline void write_breaking(std::ostream& out, const BreakingGraph& g) {
  out << g.m() << '\n';
  for (const BreakingEdge& e : g.edges()) out << fmt::format("{} {} {}\n", e.k + 1, e.l + 1, e.weight);
}

inline BreakingGraph read_breaking(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  long long m = -1;
  std::vector<BreakingEdge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::string extra;
    if (m < 0) {
      if (!(row >> m) || (row >> extra) || m < 2) {
        throw ParseError(fmt::format("breaking line {}: expected m >= 2", line_no));
      }
      continue;
    }
    long long k = 0;
    long long l = 0;
    double w = 0.0;
    if (!(row >> k >> l >> w) || (row >> extra)) {
      throw ParseError(fmt::format("breaking line {}: expected 'k l weight'", line_no));
    }
    if (k < 1 || l < 1 || k > m || l > m || k == l) {
      throw ParseError(fmt::format("breaking line {}: invalid position pair {{{}, {}}}", line_no, k, l));
    }
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ParseError(fmt::format("breaking line {}: weight must be a nonnegative number", line_no));
    }
    edges.push_back({static_cast<std::size_t>(k - 1), static_cast<std::size_t>(l - 1), w});
  }
  if (m < 0) throw ParseError("breaking: empty input");
  try {
    return BreakingGraph(static_cast<std::size_t>(m), edges);
  } catch (const Error& e) {
    throw ParseError(fmt::format("breaking: {}", e.what()));
  }
}

}  // namespace rbcml
