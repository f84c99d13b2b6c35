#pragma once

// Composite log-marginal likelihood over broken pairwise comparisons: value,
// gradient, Hessian, the W (x) G(P) connectivity conditions, and a damped
// Newton maximizer.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "rbcml/breaking.hpp"
#include "rbcml/errors.hpp"
#include "rbcml/model.hpp"
#include "rbcml/numerics.hpp"

namespace rbcml {

// Nonnegative weights on ordered pairs of alternatives, zero diagonal.
class CmlWeights {
 public:
  explicit CmlWeights(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
    if (weights_.rows() != weights_.cols()) throw DimensionMismatchError("CML weights must be square");
    if (weights_.rows() < 2) throw InvariantError("CML weights need m >= 2");
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
      if (weights_(i, i) != 0.0) throw InvariantError("CML weight diagonal must be zero");
      for (Eigen::Index j = 0; j < weights_.cols(); ++j) {
        if (!(weights_(i, j) >= 0.0) || !std::isfinite(weights_(i, j))) {
          throw InvariantError(fmt::format("CML weight ({}, {}) must be finite and nonnegative",
                                           i + 1, j + 1));
        }
      }
    }
  }

  std::size_t m() const { return static_cast<std::size_t>(weights_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const { return weights_; }

 private:
  Eigen::MatrixXd weights_;
};

inline CmlWeights uniform_weights(std::size_t m, double value = 1.0) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(m),
                                                static_cast<Eigen::Index>(m), value);
  w.diagonal().setZero();
  return CmlWeights(std::move(w));
}

struct FitOptions {
  double tol = 1e-8;
  std::size_t max_iterations = 500;
  double bound = 50.0;
  double armijo = 1e-4;
};

struct FitResult {
  Theta theta;
  double objective = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double wallclock_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct ConnectivityReport {
  bool weakly_connected = false;
  bool strongly_connected = false;
  // Weakly connected components, each sorted, ordered by smallest member.
  std::vector<std::vector<std::size_t>> components;
};

namespace detail {

inline void check_dims(const KappaMatrix& kappa, const CmlWeights& w, const Theta& theta) {
  if (kappa.m() != w.m() || kappa.m() != theta.size()) {
    throw DimensionMismatchError(fmt::format("kappa m = {}, weights m = {}, theta m = {}",
                                             kappa.m(), w.m(), theta.size()));
  }
}

// c_ij = kappa_ij * w_ij, the exponent of p_ij in the composite likelihood.
inline Eigen::MatrixXd pair_mass(const KappaMatrix& kappa, const CmlWeights& w) {
  return kappa.matrix().cwiseProduct(w.matrix());
}

}  // namespace detail

// Generic composite log-likelihood: sum over ordered pairs of
// kappa_ij * w_ij * ln p_ij(theta).
inline double cll_generic(const UtilityFamily& family, const KappaMatrix& kappa,
                          const CmlWeights& w, const Theta& theta) {
  detail::check_dims(kappa, w, theta);
  family.check_dimension(theta.size());
  const Eigen::MatrixXd c = detail::pair_mass(kappa, w);
  double total = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double mass = c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (i == j || mass == 0.0) continue;
      const double log_p = pair_log_terms(family, theta, i, j).log_p;
      if (!std::isfinite(log_p)) {
        throw DomainError(fmt::format("pairwise probability ({}, {}) is 0 or 1", i + 1, j + 1));
      }
      total += mass * log_p;
    }
  }
  return total;
}

// Plackett-Luce composite log-likelihood in its expanded form:
// sum_{i<j} c_ij theta_i + c_ji theta_j - (c_ij + c_ji) ln(e^theta_i + e^theta_j).
inline double cll_pl(const KappaMatrix& kappa, const CmlWeights& w, const Theta& theta) {
  detail::check_dims(kappa, w, theta);
  const Eigen::MatrixXd c = detail::pair_mass(kappa, w);
  const auto m = static_cast<Eigen::Index>(theta.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double cij = c(i, j);
      const double cji = c(j, i);
      if (cij == 0.0 && cji == 0.0) continue;
      const double ti = theta.values()[i];
      const double tj = theta.values()[j];
      total += cij * ti + cji * tj - (cij + cji) * numerics::log_sum_exp(ti, tj);
    }
  }
  return total;
}

inline double cll(const UtilityFamily& family, const KappaMatrix& kappa, const CmlWeights& w,
                  const Theta& theta) {
  if (family.is_plackett_luce()) return cll_pl(kappa, w, theta);
  return cll_generic(family, kappa, w, theta);
}

// Gradient with respect to all m coordinates (sums to zero).
inline Eigen::VectorXd cll_grad_full(const UtilityFamily& family, const KappaMatrix& kappa,
                                     const CmlWeights& w, const Theta& theta) {
  detail::check_dims(kappa, w, theta);
  family.check_dimension(theta.size());
  const Eigen::MatrixXd c = detail::pair_mass(kappa, w);
  const auto m = static_cast<Eigen::Index>(theta.size());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(m);
  if (family.is_plackett_luce()) {
    // sum_{i' != i} c_ii' - (c_ii' + c_i'i) e^theta_i / (e^theta_i + e^theta_i')
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        if (i == j) continue;
        const double both = c(i, j) + c(j, i);
        if (both == 0.0) continue;
        grad[i] += c(i, j) - both * numerics::logistic(theta.values()[i] - theta.values()[j]);
      }
    }
    return grad;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j || c(i, j) == 0.0) continue;
      const PairLogTerms t = pair_log_terms(family, theta, static_cast<std::size_t>(i),
                                            static_cast<std::size_t>(j));
      grad[i] += c(i, j) * t.first;
      grad[j] -= c(i, j) * t.first;
    }
  }
  return grad;
}

// Gradient over the m-1 free coordinates (theta_m is pinned to 0).
inline Eigen::VectorXd cll_grad(const UtilityFamily& family, const KappaMatrix& kappa,
                                const CmlWeights& w, const Theta& theta) {
  const Eigen::VectorXd full = cll_grad_full(family, kappa, w, theta);
  return full.head(full.size() - 1);
}

inline constexpr double kHessianStep = 1e-5;

// Full m x m Hessian. Analytic for Plackett-Luce and Gaussian families;
// central differences of the gradient otherwise.
inline Eigen::MatrixXd cll_hessian_full(const UtilityFamily& family, const KappaMatrix& kappa,
                                        const CmlWeights& w, const Theta& theta) {
  detail::check_dims(kappa, w, theta);
  family.check_dimension(theta.size());
  const auto m = static_cast<Eigen::Index>(theta.size());
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m, m);
  if (family.kind() == FamilyKind::kCustomSymmetric) {
    // The gradient is shift invariant, so re-gauging the perturbed point is harmless.
    for (Eigen::Index l = 0; l < m; ++l) {
      Eigen::VectorXd up = theta.values();
      Eigen::VectorXd down = theta.values();
      up[l] += kHessianStep;
      down[l] -= kHessianStep;
      Eigen::VectorXd gu = cll_grad_full(family, kappa, w, Theta(up));
      Eigen::VectorXd gd = cll_grad_full(family, kappa, w, Theta(down));
      hess.col(l) = (gu - gd) / (2.0 * kHessianStep);
    }
    return 0.5 * (hess + hess.transpose());
  }
  const Eigen::MatrixXd c = detail::pair_mass(kappa, w);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j || c(i, j) == 0.0) continue;
      const double h = c(i, j) * pair_log_terms(family, theta, static_cast<std::size_t>(i),
                                                static_cast<std::size_t>(j))
                                     .second;
      hess(i, i) += h;
      hess(j, j) += h;
      hess(i, j) -= h;
      hess(j, i) -= h;
    }
  }
  return hess;
}

inline Eigen::MatrixXd cll_hessian(const UtilityFamily& family, const KappaMatrix& kappa,
                                   const CmlWeights& w, const Theta& theta) {
  const Eigen::MatrixXd full = cll_hessian_full(family, kappa, w, theta);
  return full.topLeftCorner(full.rows() - 1, full.cols() - 1);
}

// Connectivity of the directed graph with edge i -> j of weight w_ij * kappa_ij.
inline ConnectivityReport wg_product(const CmlWeights& w, const KappaMatrix& kappa) {
  if (w.m() != kappa.m()) throw DimensionMismatchError("weights and kappa disagree on m");
  const std::size_t m = w.m();
  std::vector<std::vector<std::size_t>> out_edges(m);
  std::vector<std::vector<std::size_t>> in_edges(m);
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j && w(i, j) * kappa(i, j) > 0.0) {
        out_edges[i].push_back(j);
        in_edges[j].push_back(i);
        parent[find(i)] = find(j);
      }
    }
  }
  auto reaches_all = [&](const std::vector<std::vector<std::size_t>>& adjacency) {
    std::vector<bool> seen(m, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t u : adjacency[v]) {
        if (!seen[u]) {
          seen[u] = true;
          ++count;
          stack.push_back(u);
        }
      }
    }
    return count == m;
  };

  ConnectivityReport report;
  std::vector<std::size_t> slot(m, m);
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t root = find(a);
    if (slot[root] == m) {
      slot[root] = report.components.size();
      report.components.emplace_back();
    }
    report.components[slot[root]].push_back(a);
  }
  report.weakly_connected = report.components.size() == 1;
  report.strongly_connected =
      report.weakly_connected && reaches_all(out_edges) && reaches_all(in_edges);
  return report;
}

// Damped Newton ascent over the m-1 free coordinates with Armijo backtracking.
// `value(x)` returns the objective; `derivatives(x, grad, hess)` fills the
// gradient and Hessian. A non-negative-definite Hessian is shifted until its
// negation factors, which degrades the step towards gradient ascent.
template <class ValueFn, class DerivativeFn>
FitResult newton_maximize(ValueFn&& value, DerivativeFn&& derivatives, const Theta& init,
                          const FitOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  Eigen::VectorXd x = init.free();
  const Eigen::Index dim = x.size();
  double f = value(x);
  Eigen::VectorXd grad(dim);
  Eigen::MatrixXd hess(dim, dim);
  derivatives(x, grad, hess);

  FitResult result;
  std::size_t iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    if (grad.norm() <= opts.tol) break;

    Eigen::MatrixXd neg = -hess;
    Eigen::LLT<Eigen::MatrixXd> llt(neg);
    double shift = 0.0;
    const double diag_scale = std::max(1e-12, neg.diagonal().cwiseAbs().maxCoeff());
    while (llt.info() != Eigen::Success) {
      shift = shift == 0.0 ? 1e-10 * diag_scale : shift * 10.0;
      llt.compute(neg + shift * Eigen::MatrixXd::Identity(dim, dim));
      if (shift > 1e12 * diag_scale) break;
    }
    Eigen::VectorXd direction = llt.info() == Eigen::Success ? Eigen::VectorXd(llt.solve(grad)) : grad;
    double slope = grad.dot(direction);
    if (!(slope > 0.0)) {
      direction = grad;
      slope = grad.squaredNorm();
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    double f_candidate = f;
    const double noise_floor = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    for (int halving = 0; halving < 60; ++halving) {
      candidate = x + step * direction;
      f_candidate = value(candidate);
      if (std::isfinite(f_candidate) &&
          (f_candidate >= f + opts.armijo * step * slope ||
           (halving == 0 && f_candidate >= f - noise_floor && slope <= noise_floor))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    x = std::move(candidate);
    f = f_candidate;
    if (x.cwiseAbs().maxCoeff() > opts.bound) {
      throw DivergedError(fmt::format(
          "iterate left the bound |theta| <= {} after {} iterations; the maximizer is likely unbounded",
          opts.bound, iter + 1));
    }
    derivatives(x, grad, hess);
  }

  result.theta = Theta::from_free(x);
  result.objective = f;
  result.gradient_norm = grad.norm();
  result.iterations = iter;
  result.converged = result.gradient_norm <= opts.tol;
  result.wallclock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline FitResult maximize_cll(const UtilityFamily& family, const KappaMatrix& kappa,
                              const CmlWeights& w, const Theta& init, const FitOptions& opts = {}) {
  detail::check_dims(kappa, w, init);
  family.check_dimension(init.size());
  const ConnectivityReport connectivity = wg_product(w, kappa);

  auto value = [&](const Eigen::VectorXd& x) { return cll(family, kappa, w, Theta::from_free(x)); };
  auto derivatives = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
    const Theta theta = Theta::from_free(x);
    grad = cll_grad(family, kappa, w, theta);
    hess = cll_hessian(family, kappa, w, theta);
  };
  FitResult result = newton_maximize(value, derivatives, init, opts);
  if (!connectivity.weakly_connected) {
    result.warnings.push_back(
        "W (x) G(P) is not weakly connected: the objective is not strictly concave and the "
        "maximizer is not unique");
  } else if (!connectivity.strongly_connected) {
    result.warnings.push_back(
        "W (x) G(P) is not strongly connected: the maximizer may be unbounded");
  }
  return result;
}

// Text format: first line m, then "i j weight" per ordered pair (1-based).
// Pairs that are not listed have weight 0.
inline void write_weights(std::ostream& out, const CmlWeights& w) {
  out << w.m() << '\n';
  for (std::size_t i = 0; i < w.m(); ++i) {
    for (std::size_t j = 0; j < w.m(); ++j) {
      if (i != j && w(i, j) > 0.0) out << fmt::format("{} {} {}\n", i + 1, j + 1, w(i, j));
    }
  }
}

inline CmlWeights read_weights(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  long long m = -1;
  Eigen::MatrixXd w;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::string extra;
    if (m < 0) {
      if (!(row >> m) || (row >> extra) || m < 2) {
        throw ParseError(fmt::format("weights line {}: expected m >= 2", line_no));
      }
      w = Eigen::MatrixXd::Zero(m, m);
      continue;
    }
    long long i = 0;
    long long j = 0;
    double value = 0.0;
    if (!(row >> i >> j >> value) || (row >> extra)) {
      throw ParseError(fmt::format("weights line {}: expected 'i j weight'", line_no));
    }
    if (i < 1 || j < 1 || i > m || j > m || i == j) {
      throw ParseError(fmt::format("weights line {}: invalid pair ({}, {})", line_no, i, j));
    }
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw ParseError(fmt::format("weights line {}: weight must be a nonnegative number", line_no));
    }
    w(i - 1, j - 1) = value;
  }
  if (m < 0) throw ParseError("weights: empty input");
  return CmlWeights(std::move(w));
}

}  // namespace rbcml
