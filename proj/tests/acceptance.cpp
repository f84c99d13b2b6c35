// Acceptance suite: one PASS/FAIL line per criterion; exits nonzero when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cli_runner.hpp"
#include "oracles.hpp"
#include "rbcml/rbcml.hpp"

using namespace rbcml;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string data(const std::string& name) { return std::string(RBCML_DATA_DIR) + "/" + name; }

KappaMatrix random_kappa(std::size_t m, SeededRng& rng) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) k(i, j) = rng.uniform(0.05, 1.0);
  return KappaMatrix(k);
}

CmlWeights random_weights(std::size_t m, SeededRng& rng) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) w(i, j) = rng.uniform(0.1, 2.0);
  return CmlWeights(w);
}

// 1. Chain-weighted fit of the two-ranking profile from the shipped data files.
Outcome criterion1() {
  const auto start = std::chrono::steady_clock::now();
  std::ifstream in(data("two_rankings.profile"));
  const Profile profile = read_profile(in);
  const BreakingGraph g = parse_breaking_spec(data("position_union_m3.breaking"), 3);
  const CmlWeights w = parse_weights_spec(data("chain.weights"), 3);
  const FitResult fit = maximize_cll(UtilityFamily::plackett_luce(), kappa_stats(g, profile), w, Theta::zeros(3));
  const double elapsed = seconds_since(start);
  const double err2 = std::abs(fit.theta[1] - 0.405465);
  const bool pass = fit.converged && err2 < 1e-6 && std::abs(fit.theta[0]) < 1e-6 && fit.theta[2] == 0.0 && elapsed < 1.0;
  return {pass, fmt::format("theta = ({:.9f}, {:.9f}, {}), |theta2 - 0.405465| = {:.2e}, {:.3f} s", fit.theta[0],
                            fit.theta[1], fit.theta[2], err2, elapsed)};
}

// 2. Kappa statistics of the two-ranking profile.
Outcome criterion2() {
  std::ifstream in(data("two_rankings.profile"));
  const KappaMatrix k = kappa_stats(parse_breaking_spec(data("position_union_m3.breaking"), 3), read_profile(in));
  const double sixth = 1.0 / 6.0;
  const double quarter = 1.0 / 4.0;
  const double errs[] = {std::abs(k(0, 1) - sixth), std::abs(k(0, 2) - sixth), std::abs(k(1, 2) - quarter),
                         std::abs(k(2, 1) - sixth), std::abs(k(2, 0) - sixth), std::abs(k(1, 0) - quarter)};
  double worst = 0.0;
  for (double e : errs) worst = std::max(worst, e);
  return {worst < 1e-12, fmt::format("max deviation from (1/6, 1/6, 1/4, 1/6, 1/6, 1/4) = {:.2e}", worst)};
}

// 3. Analytic gradient against central differences.
Outcome criterion3() {
  const auto start = std::chrono::steady_clock::now();
  SeededRng rng(303);
  double worst = 0.0;
  int instances = 0;
  for (const auto& family : {UtilityFamily::plackett_luce(), UtilityFamily::gaussian()}) {
    for (std::size_t m : {3u, 5u}) {
      for (int rep = 0; rep < 100; ++rep) {
        const KappaMatrix k = random_kappa(m, rng);
        const CmlWeights w = random_weights(m, rng);
        const Theta theta = sample_ground_truth(m, rng);
        auto f = [&](const Eigen::VectorXd& x) { return cll(family, k, w, Theta::from_free(x)); };
        const Eigen::VectorXd fd = oracle::gradient_richardson(f, theta.free());
        const Eigen::VectorXd g = cll_grad(family, k, w, theta);
        worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff());
        ++instances;
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-6 && elapsed < 30.0,
          fmt::format("{} instances, max relative error {:.2e}, {:.2f} s", instances, worst, elapsed)};
}

// 4. Negative-definite Hessian when connected; shift invariance when not.
Outcome criterion4() {
  SeededRng rng(404);
  double max_eig = -std::numeric_limits<double>::infinity();
  double max_shift_change = 0.0;
  int connected = 0;
  for (const auto& family : {UtilityFamily::plackett_luce(), UtilityFamily::gaussian()}) {
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t m = 3 + rep % 3;
      const Theta theta = sample_ground_truth(m, rng);
      KappaMatrix k = random_kappa(m, rng);
      CmlWeights w = random_weights(m, rng);
      if (rep % 2 == 1) {
        // Sparse instance: kappa from a small sampled profile under position-1 breaking.
        k = kappa_stats(position_k_breaking(m, 0), sample_profile(family, theta, 8, rng));
        w = uniform_weights(m);
        if (!wg_product(w, k).weakly_connected) {
          --rep;
          continue;
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cll_hessian(family, k, w, theta));
      max_eig = std::max(max_eig, eig.eigenvalues().maxCoeff());
      ++connected;
    }
    for (int rep = 0; rep < 20; ++rep) {
      // Two blocks {a1, a2} and {a3, a4, a5} with no weight between them.
      const std::size_t m = 5;
      Eigen::MatrixXd wm = random_weights(m, rng).matrix();
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 2; j < m; ++j) wm(i, j) = wm(j, i) = 0.0;
      const CmlWeights w(wm);
      const KappaMatrix k = random_kappa(m, rng);
      if (wg_product(w, k).weakly_connected) return {false, "constructed instance is unexpectedly connected"};
      Eigen::VectorXd theta = sample_ground_truth(m, rng).values();
      const double base = cll(family, k, w, Theta(theta));
      for (double c : {-2.0, 0.7, 3.5}) {
        Eigen::VectorXd shifted = theta;
        shifted.head(2).array() += c;
        max_shift_change = std::max(max_shift_change, std::abs(cll(family, k, w, Theta(shifted)) - base));
      }
    }
  }
  return {max_eig < 0.0 && max_shift_change <= 1e-10,
          fmt::format("{} connected instances, largest Hessian eigenvalue {:.3e}; disconnected shift change {:.2e}",
                      connected, max_eig, max_shift_change)};
}

// 5. Structural verdicts agree with the expected-gradient classification.
Outcome criterion5() {
  struct Fixture {
    std::string name;
    BreakingGraph g;
    CmlWeights w;
  };
  std::vector<Fixture> battery;
  auto asymmetric = [](std::size_t m) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(m, m);
    w.diagonal().setZero();
    w(1, 0) = 3.0;
    return CmlWeights(w);
  };
  for (std::size_t m : {3u, 4u}) {
    std::vector<std::pair<std::string, BreakingGraph>> graphs{{"uniform", uniform_breaking(m)},
                                                              {"position:1", position_k_breaking(m, 0)},
                                                              {"position:" + std::to_string(m - 1), position_k_breaking(m, m - 2)},
                                                              {"single-edge-g1m", parse_breaking_spec(data(fmt::format("fixtures/single_edge_m{}.breaking", m)), m)}};
    std::vector<std::pair<std::string, CmlWeights>> weights{{"W_u", uniform_weights(m)}, {"asymmetric-W", asymmetric(m)}};
    if (m == 3) {
      graphs.emplace_back("position-union", parse_breaking_spec(data("position_union_m3.breaking"), 3));
      graphs.emplace_back("unequal-top", parse_breaking_spec(data("fixtures/unequal_top_m3.breaking"), 3));
      weights.emplace_back("chain-W", parse_weights_spec(data("chain.weights"), 3));
    } else {
      graphs.emplace_back("position-union", parse_breaking_spec(data("fixtures/position_union_m4.breaking"), 4));
    }
    for (const auto& [gname, g] : graphs)
      for (const auto& [wname, w] : weights) battery.push_back({fmt::format("m={} {} {}", m, gname, wname), g, w});
  }

  int checked = 0;
  int disagreements = 0;
  double worst_consistent = 0.0;
  double weakest_inconsistent = std::numeric_limits<double>::infinity();
  std::string first_failure;
  for (const auto& [family, family_class] :
       {std::pair{UtilityFamily::plackett_luce(), FamilyClass::kPlackettLuce},
        std::pair{UtilityFamily::gaussian(), FamilyClass::kSymmetricRum}}) {
    SeededRng rng(505);
    for (const Fixture& fx : battery) {
      std::vector<Theta> truths;
      for (int t = 0; t < 5; ++t) truths.push_back(sample_ground_truth(fx.g.m(), rng));
      const bool consistent = check_consistency(family_class, fx.g, fx.w).consistent;
      const GradientVerdict gv = classify_by_expected_gradient(family, fx.g, fx.w, truths);
      const bool agree = consistent ? gv.max_norm < 1e-8 : gv.max_norm > 1e-3;
      if (consistent) worst_consistent = std::max(worst_consistent, gv.max_norm);
      else weakest_inconsistent = std::min(weakest_inconsistent, gv.max_norm);
      if (!agree) {
        ++disagreements;
        if (first_failure.empty()) {
          first_failure = fmt::format("; first disagreement {} {} ({}): {:.2e}", family.name(), fx.name,
                                      consistent ? "consistent" : "inconsistent", gv.max_norm);
        }
      }
      ++checked;
    }
  }
  return {disagreements == 0,
          fmt::format("{} (family, G, W) configurations, {} disagreements; largest consistent norm {:.2e}, "
                      "smallest inconsistent norm {:.2e}{}",
                      checked, disagreements, worst_consistent, weakest_inconsistent, first_failure)};
}

ExperimentConfig trend_config(const std::string& family, std::size_t m, std::vector<std::size_t> n_grid,
                              std::size_t trials, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.family = family;
  cfg.m = m;
  cfg.n_grid = std::move(n_grid);
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.estimators = {{"rbcml-uniform", EstimatorMethod::kRbcml, 1, "uniform", "uniform-w"}};
  cfg.record_timing = false;
  return cfg;
}

// 6. MSE decays at the 1/n rate for (G_u, W_u).
Outcome criterion6() {
  const auto start = std::chrono::steady_clock::now();
  const auto pl = run_experiment(trend_config("pl", 4, {1000, 10000}, 200, 606));
  const auto gauss = run_experiment(trend_config("gaussian", 4, {500, 5000}, 200, 607));
  auto mean_mse = [](const ResultRow& r) { return r.n_mse_mean / static_cast<double>(r.n); };
  const double pl_ratio = mean_mse(pl.rows[1]) / mean_mse(pl.rows[0]);
  const double gauss_ratio = mean_mse(gauss.rows[1]) / mean_mse(gauss.rows[0]);
  const std::size_t failures = pl.rows[0].failures + pl.rows[1].failures + gauss.rows[0].failures + gauss.rows[1].failures;
  const double elapsed = seconds_since(start);
  return {pl_ratio < 0.2 && gauss_ratio < 1.0 / 3.0 && failures == 0 && elapsed < 600.0,
          fmt::format("PL MSE ratio n=10000/n=1000 = {:.4f} (< 0.2); Gaussian n=5000/n=500 = {:.4f} (< 1/3); "
                      "{} failed fits; {:.1f} s",
                      pl_ratio, gauss_ratio, failures, elapsed)};
}

// 7. Cramer-Rao reference: enumeration against sampled score covariance, and
// the full-likelihood MLE sits just above it.
Outcome criterion7() {
  const Theta theta0 = Theta::zeros(3);
  const double cr = cramer_rao_trace_pl(theta0);
  const Eigen::MatrixXd cov = oracle::pl_score_covariance_mc(theta0.values(), 400000, 707);
  const double cr_mc = cov.inverse().trace() / 2.0;
  const double rel = std::abs(cr_mc - cr) / cr;

  ExperimentConfig cfg = trend_config("pl", 3, {5000}, 500, 708);
  cfg.theta0 = theta0;
  cfg.estimators = {{"pl-full-mle", EstimatorMethod::kPlFullMle, 1, "uniform", "uniform-w"}};
  const ResultRow row = run_experiment(cfg).rows[0];
  const double ratio = row.n_mse_mean / cr;
  return {rel < 0.02 && ratio >= 0.9 && ratio <= 1.5 && row.failures == 0,
          fmt::format("CR (enumeration) = {:.6f}, sampled = {:.6f}, relative gap {:.4f}; pl_full_mle n*MSE = {:.4f} "
                      "+- {:.4f} = {:.3f} x CR",
                      cr, cr_mc, rel, row.n_mse_mean, row.n_mse_stderr, ratio)};
}

// 8. Two adaptive rounds with the heuristic W do not lose to one uniform round.
Outcome criterion8() {
  ExperimentConfig cfg = trend_config("pl", 5, {5000}, 500, 808);
  cfg.estimators = {{"T1-uniform-W", EstimatorMethod::kRbcml, 1, "uniform", "uniform-w"},
                    {"T2-heuristic-W", EstimatorMethod::kRbcml, 2, "uniform", "pl-heuristic-w"}};
  const auto report = run_experiment(cfg);
  const ResultRow& t1 = report.rows[0];
  const ResultRow& t2 = report.rows[1];
  const double slack = 2.0 * std::sqrt(t1.n_mse_stderr * t1.n_mse_stderr + t2.n_mse_stderr * t2.n_mse_stderr);
  return {t2.n_mse_mean <= t1.n_mse_mean + slack && t1.failures == 0 && t2.failures == 0,
          fmt::format("n*MSE T=1 uniform W = {:.5f} +- {:.5f}; T=2 heuristic W = {:.5f} +- {:.5f}; ratio {:.4f}",
                      t1.n_mse_mean, t1.n_mse_stderr, t2.n_mse_mean, t2.n_mse_stderr, t2.n_mse_mean / t1.n_mse_mean)};
}

// 9. Log-concavity of densities, self-convolutions and CDFs.
Outcome criterion9() {
  const std::vector<double> grid = uniform_grid(-10.0, 10.0, 2001);
  const auto pl = UtilityFamily::plackett_luce();
  const auto gauss = UtilityFamily::gaussian();
  std::vector<std::pair<std::string, std::function<double(double)>>> log_functions{
      {"Gumbel density", [&](double x) { return pl.noise_log_density(0, x); }},
      {"Gaussian density", [&](double x) { return gauss.noise_log_density(0, x); }},
      {"Gumbel self-convolution", [&](double y) { return log_self_convolution([&](double x) { return pl.noise_log_density(0, x); }, y); }},
      {"Gaussian self-convolution", [&](double y) { return log_self_convolution([&](double x) { return gauss.noise_log_density(0, x); }, y); }},
      {"Gumbel CDF", [&](double x) { return pl.noise_log_cdf(0, x); }},
      {"Gaussian CDF", [&](double x) { return gauss.noise_log_cdf(0, x); }},
      {"logistic CDF", [](double x) { return -numerics::softplus(-x); }},
      {"Gaussian pairwise CDF", [](double x) { return numerics::normal_log_cdf(x * numerics::kInvSqrt2); }},
  };
  bool pass = true;
  std::string detail;
  for (const auto& [name, f] : log_functions) {
    const double probe = log_concavity_probe_log(f, grid);
    pass = pass && probe < 0.0;
    detail += fmt::format("{}{} {:.3e}", detail.empty() ? "" : "; ", name, probe);
  }
  return {pass, detail};
}

// 10. Every subcommand is byte-identical across two runs.
Outcome criterion10() {
  const auto dir = cli::scratch("acceptance-determinism");
  const std::string profile = (dir / "profile").string();
  std::ofstream(dir / "sweep.json") << R"({"family": "pl", "m": 3, "n_grid": [200, 400], "trials": 3, "seed": 5,
    "estimators": [{"name": "rbcml", "label": "adaptive", "T": 2, "weights": "pl-heuristic-w"}, {"name": "pl-full-mle"}],
    "timing": false})";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "generate --family gaussian --m 4 --n 300 --seed 99 --truth " + (dir / "truth").string()},
      {"fit", "fit --profile " + data("two_rankings.profile") + " --breaking " + data("position_union_m3.breaking") +
                  " --weights " + data("chain.weights") + " --no-timing"},
      {"fit adaptive", "fit --profile PROFILE --T 2 --weights pl-heuristic-w --no-timing"},
      {"check", "check --breaking " + data("fixtures/unequal_top_m3.breaking") + " --weights uniform --family-class pl --m 3"},
      {"sweep", "sweep " + (dir / "sweep.json").string() + " --trials-jsonl " + (dir / "trials.jsonl").string()},
      {"crbound", "crbound --m 4 --theta 1,0.5,2,0 --normalize"},
  };
  if (cli::run("generate --m 4 --n 500 --seed 12 --out " + profile).exit_code != 0) return {false, "generate failed"};
  bool pass = true;
  std::string detail;
  for (auto [name, args] : commands) {
    if (const auto pos = args.find("PROFILE"); pos != std::string::npos) args.replace(pos, 7, profile);
    const cli::Run a = cli::run(args);
    const std::string side_a = cli::slurp(dir / "truth") + cli::slurp(dir / "trials.jsonl");
    const cli::Run b = cli::run(args);
    const std::string side_b = cli::slurp(dir / "truth") + cli::slurp(dir / "trials.jsonl");
    const bool same = a.exit_code == b.exit_code && a.exit_code >= 0 && a.exit_code <= 1 && !a.out.empty() &&
                      a.out == b.out && side_a == side_b;
    pass = pass && same;
    detail += fmt::format("{}{} {}", detail.empty() ? "" : "; ", name, same ? "identical" : "DIFFERS");
  }
  return {pass, detail};
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  int failed = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    Outcome outcome;
    try {
      outcome = criteria[c]();
    } catch (const std::exception& e) {
      outcome = {false, fmt::format("exception: {}", e.what())};
    }
    failed += outcome.pass ? 0 : 1;
    std::cout << fmt::format("criterion {:>2}: {}  {}", c + 1, outcome.pass ? "PASS" : "FAIL", outcome.detail) << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failed, criteria.size()) << std::endl;
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
