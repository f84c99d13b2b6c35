#pragma once

// Experiment harness: n x MSE, the Plackett-Luce Cramer-Rao reference, the
// full-likelihood Plackett-Luce MLE, and seeded Monte-Carlo sweeps.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "rbcml/adaptive.hpp"
#include "rbcml/breaking.hpp"
#include "rbcml/cml.hpp"
#include "rbcml/consistency.hpp"
#include "rbcml/errors.hpp"
#include "rbcml/model.hpp"
#include "rbcml/numerics.hpp"
#include "rbcml/parallel.hpp"
#include "rbcml/rng.hpp"
#include "rbcml/sampling.hpp"
#include "rbcml/specs.hpp"

namespace rbcml {

// n times the mean squared error over the m-1 free coordinates.
inline double n_mse(const Theta& estimate, const Theta& truth, std::size_t n) {
  return static_cast<double>(n) * mse(estimate, truth);
}

namespace detail {

// Log-likelihood of one ranking under Plackett-Luce with its score and
// Hessian over all m coordinates, accumulated with multiplicity `count`.
inline double accumulate_pl_ranking(const Theta& theta, const Ranking& r, double count,
                                    Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
  const std::size_t m = r.size();
  double ll = 0.0;
  Eigen::VectorXd probs(static_cast<Eigen::Index>(m));
  for (std::size_t t = 0; t + 1 < m; ++t) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = t; k < m; ++k) top = std::max(top, theta[r[k]]);
    double total = 0.0;
    for (std::size_t k = t; k < m; ++k) total += std::exp(theta[r[k]] - top);
    ll += theta[r[t]] - top - std::log(total);
    if (!grad) continue;
    for (std::size_t k = t; k < m; ++k) probs[static_cast<Eigen::Index>(k)] = std::exp(theta[r[k]] - top) / total;
    (*grad)[static_cast<Eigen::Index>(r[t])] += count;
    for (std::size_t k = t; k < m; ++k) {
      const auto a = static_cast<Eigen::Index>(r[k]);
      const double pa = probs[static_cast<Eigen::Index>(k)];
      (*grad)[a] -= count * pa;
      if (!hess) continue;
      (*hess)(a, a) -= count * pa;
      for (std::size_t l = t; l < m; ++l) {
        (*hess)(a, static_cast<Eigen::Index>(r[l])) += count * pa * probs[static_cast<Eigen::Index>(l)];
      }
    }
  }
  return count * ll;
}

inline std::vector<std::pair<Ranking, double>> ranking_counts(const Profile& profile) {
  std::map<std::vector<std::size_t>, double> counts;
  for (const Ranking& r : profile.rankings()) counts[r.order()] += 1.0;
  std::vector<std::pair<Ranking, double>> out;
  out.reserve(counts.size());
  for (auto& [order, count] : counts) out.emplace_back(Ranking(order), count);
  return out;
}

}  // namespace detail

// Average Plackett-Luce log-likelihood of the profile.
inline double pl_log_likelihood(const Profile& profile, const Theta& theta) {
  if (profile.m() != theta.size()) throw DimensionMismatchError("profile and theta disagree on m");
  double total = 0.0;
  for (const Ranking& r : profile.rankings()) total += detail::accumulate_pl_ranking(theta, r, 1.0, nullptr, nullptr);
  return total / static_cast<double>(profile.n());
}

// Maximizes the exact Plackett-Luce likelihood with the same Newton machinery
// as the composite likelihood.
inline FitResult pl_full_mle(const Profile& profile, const FitOptions& opts = {},
                             const std::optional<Theta>& init = std::nullopt) {
  const std::size_t m = profile.m();
  const auto counts = detail::ranking_counts(profile);
  const double n = static_cast<double>(profile.n());
  auto value = [&](const Eigen::VectorXd& x) {
    const Theta theta = Theta::from_free(x);
    double total = 0.0;
    for (const auto& [r, count] : counts) total += detail::accumulate_pl_ranking(theta, r, count, nullptr, nullptr);
    return total / n;
  };
  auto derivatives = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
    const Theta theta = Theta::from_free(x);
    const auto mm = static_cast<Eigen::Index>(m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(mm);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(mm, mm);
    for (const auto& [r, count] : counts) detail::accumulate_pl_ranking(theta, r, count, &g, &h);
    grad = g.head(mm - 1) / n;
    hess = h.topLeftCorner(mm - 1, mm - 1) / n;
  };
  return newton_maximize(value, derivatives, init ? *init : Theta::zeros(m), opts);
}

// Single-observation Fisher information of the gauge-fixed Plackett-Luce
// model, E[s s^T] with s the score over the m-1 free coordinates, by exact
// enumeration of all m! rankings.
inline Eigen::MatrixXd fisher_information_pl(const Theta& theta) {
  const std::size_t m = theta.size();
  if (m > kMaxExactEnumerationPl) {
    throw TooLargeError(fmt::format("exact Fisher information supports m <= {}", kMaxExactEnumerationPl));
  }
  const auto free = static_cast<Eigen::Index>(m - 1);
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(free, free);
  for (const Ranking& r : all_rankings(m)) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    detail::accumulate_pl_ranking(theta, r, 1.0, &score, nullptr);
    const Eigen::VectorXd s = score.head(free);
    info += ranking_prob_pl(theta, r) * s * s.transpose();
  }
  return info;
}

// Trace of the single-observation Cramer-Rao bound, i.e. the n x MSE floor
// for unbiased estimators. Divided by m-1 when `normalize` so that it is on
// the same scale as n_mse.
inline double cramer_rao_trace_pl(const Theta& theta0, bool normalize = true) {
  const Eigen::MatrixXd info = fisher_information_pl(theta0);
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) throw Error("Fisher information is singular");
  const Eigen::MatrixXd inverse = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  const double trace = inverse.trace();
  return normalize ? trace / static_cast<double>(theta0.size() - 1) : trace;
}

enum class EstimatorMethod { kRbcml, kPlFullMle };

struct EstimatorSpec {
  std::string label;
  EstimatorMethod method = EstimatorMethod::kRbcml;
  std::size_t iterations = 1;
  std::string breaking = "uniform";
  std::string weights = "uniform-w";
};

struct ExperimentConfig {
  std::string family = "pl";
  std::size_t m = 0;
  std::vector<std::size_t> n_grid;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::vector<EstimatorSpec> estimators;
  // Fixed ground truth; sampled per trial when absent.
  std::optional<Theta> theta0;
  std::string output;
  std::string trials_output;
  bool record_timing = true;
  std::size_t workers = 1;
  FitOptions fit;
};

struct ResultRow {
  std::string estimator;
  std::size_t n = 0;
  double n_mse_mean = 0.0;
  double n_mse_stderr = 0.0;
  double runtime_mean_s = 0.0;
  std::size_t failures = 0;
};

struct TrialRecord {
  std::string estimator;
  std::size_t n = 0;
  std::size_t trial = 0;
  std::uint64_t stream = 0;
  Theta theta0;
  std::optional<Theta> estimate;
  double mse = 0.0;
  double runtime_s = 0.0;
  std::string error;
};

struct ExperimentReport {
  std::vector<ResultRow> rows;
  std::vector<TrialRecord> trials;
};

inline void validate(const ExperimentConfig& cfg) {
  const UtilityFamily family = parse_family(cfg.family);
  if (cfg.m < 2) throw DomainError("experiment m must be at least 2");
  family.check_dimension(cfg.m);
  if (cfg.n_grid.empty()) throw DomainError("experiment n_grid must be nonempty");
  for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
    if (cfg.n_grid[k] < 1 || (k > 0 && cfg.n_grid[k] <= cfg.n_grid[k - 1])) {
      throw DomainError("experiment n_grid must be positive and strictly increasing");
    }
  }
  if (cfg.trials < 1) throw DomainError("experiment trials must be at least 1");
  if (cfg.estimators.empty()) throw DomainError("experiment needs at least one estimator");
  if (cfg.theta0 && cfg.theta0->size() != cfg.m) throw DimensionMismatchError("theta0 length differs from m");
  for (const EstimatorSpec& e : cfg.estimators) {
    if (e.method == EstimatorMethod::kPlFullMle && !family.is_plackett_luce()) {
      throw DomainError("pl-full-mle requires the pl family");
    }
    if (e.iterations < 1) throw DomainError("estimator iterations must be at least 1");
  }
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const UtilityFamily family = parse_family(cfg.family);
  struct Prepared {
    const EstimatorSpec* spec;
    AdaptiveConfig adaptive;
  };
  std::vector<Prepared> prepared;
  for (const EstimatorSpec& e : cfg.estimators) {
    AdaptiveConfig adaptive;
    if (e.method == EstimatorMethod::kRbcml) {
      adaptive = {e.iterations, parse_breaking_heuristic(e.breaking, cfg.m),
                  parse_weight_heuristic(e.weights, cfg.m), cfg.fit};
    }
    prepared.push_back({&e, std::move(adaptive)});
  }

  const std::size_t estimators = prepared.size();
  ExperimentReport report;
  for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
    const std::size_t n = cfg.n_grid[k];
    std::vector<TrialRecord> records(cfg.trials * estimators);
    parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
      const std::uint64_t stream = k * cfg.trials + t;
      SeededRng rng = SeededRng::derive(cfg.seed, stream);
      const Theta theta0 = cfg.theta0 ? *cfg.theta0 : sample_ground_truth(cfg.m, rng);
      const Profile profile = sample_profile(family, theta0, n, rng);
      for (std::size_t e = 0; e < estimators; ++e) {
        TrialRecord& rec = records[t * estimators + e];
        rec = {prepared[e].spec->label, n, t, stream, theta0, std::nullopt, 0.0, 0.0, ""};
        const auto start = std::chrono::steady_clock::now();
        try {
          if (prepared[e].spec->method == EstimatorMethod::kPlFullMle) {
            FitResult fit = pl_full_mle(profile, cfg.fit);
            if (fit.converged) rec.estimate = fit.theta;
            else rec.error = "did not converge";
          } else {
            AdaptiveResult fit = adaptive_rbcml(profile, prepared[e].adaptive, family);
            if (fit.completed) rec.estimate = fit.final_fit().theta;
            else rec.error = fit.failure;
          }
        } catch (const Error& err) {
          rec.error = err.what();
        }
        rec.runtime_s = cfg.record_timing
                            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
                            : 0.0;
        if (rec.estimate) rec.mse = mse(*rec.estimate, theta0);
      }
    });

    for (std::size_t e = 0; e < estimators; ++e) {
      ResultRow row;
      row.estimator = prepared[e].spec->label;
      row.n = n;
      double sum = 0.0;
      double sum_sq = 0.0;
      double runtime = 0.0;
      std::size_t ok = 0;
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        const TrialRecord& rec = records[t * estimators + e];
        if (!rec.estimate) {
          ++row.failures;
          continue;
        }
        const double value = static_cast<double>(n) * rec.mse;
        sum += value;
        sum_sq += value * value;
        runtime += rec.runtime_s;
        ++ok;
      }
      if (ok > 0) {
        const double count = static_cast<double>(ok);
        row.n_mse_mean = sum / count;
        row.runtime_mean_s = runtime / count;
        if (ok > 1) {
          const double var = (sum_sq - count * row.n_mse_mean * row.n_mse_mean) / (count - 1.0);
          row.n_mse_stderr = std::sqrt(std::max(0.0, var) / count);
        }
      }
      report.rows.push_back(std::move(row));
    }
    for (TrialRecord& rec : records) report.trials.push_back(std::move(rec));
  }
  return report;
}

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "estimator,n,n_mse_mean,n_mse_stderr,runtime_mean_s,failures\n";
  for (const ResultRow& row : rows) {
    out << fmt::format("{},{},{},{},{},{}\n", row.estimator, row.n, row.n_mse_mean, row.n_mse_stderr,
                       row.runtime_mean_s, row.failures);
  }
}

}  // namespace rbcml
