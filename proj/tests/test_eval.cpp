#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "rbcml/eval.hpp"
#include "rbcml/experiment_config.hpp"

using namespace rbcml;

TEST(NMse, Examples) {
  EXPECT_EQ(n_mse(Theta{0.3, 0.0}, Theta{0.3, 0.0}, 10), 0.0);
  EXPECT_NEAR(n_mse(Theta{0.1, 0.0}, Theta{0.0, 0.0}, 100), 1.0, 1e-12);
  EXPECT_NEAR(n_mse(Theta{0.2, 0.1, 0.0}, Theta::zeros(3), 200), 2.0 * n_mse(Theta{0.2, 0.1, 0.0}, Theta::zeros(3), 100),
              1e-15);
}

TEST(CramerRao, TwoAlternativesAndGauge) {
  EXPECT_NEAR(cramer_rao_trace_pl(Theta::zeros(2)), 4.0, 1e-12);
  const Eigen::Vector3d v(0.7, -0.3, 0.2);
  const Eigen::Vector3d shifted = v.array() - 1.3;
  EXPECT_NEAR(cramer_rao_trace_pl(Theta(v)), cramer_rao_trace_pl(Theta(shifted)), 1e-12);
  EXPECT_NEAR(cramer_rao_trace_pl(Theta::zeros(3), false), 2.0 * cramer_rao_trace_pl(Theta::zeros(3)), 1e-12);
  EXPECT_THROW(cramer_rao_trace_pl(Theta::zeros(9)), TooLargeError);
}

TEST(CramerRao, FisherMatchesScoreOracle) {
  const Theta t{0.4, -0.9, 1.1, 0.0};
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(3, 3);
  for (const auto& order : oracle::permutations(4)) {
    const Eigen::VectorXd s = oracle::pl_score(t.values(), order);
    ref += oracle::pl_prob(t.values(), order) * s * s.transpose();
  }
  EXPECT_LT((fisher_information_pl(t) - ref).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(PlFullMle, TwoAlternativeClosedForm) {
  std::vector<Ranking> rs;
  for (int k = 0; k < 7; ++k) rs.push_back(Ranking{0, 1});
  for (int k = 0; k < 3; ++k) rs.push_back(Ranking{1, 0});
  const Profile p(2, rs);
  const FitResult r = pl_full_mle(p);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.theta[0], std::log(7.0 / 3.0), 1e-7);
  const FitResult cml = maximize_cll(UtilityFamily::plackett_luce(), kappa_stats(uniform_breaking(2), p),
                                     uniform_weights(2), Theta::zeros(2));
  EXPECT_NEAR(cml.theta[0], r.theta[0], 1e-7);
}

TEST(PlFullMle, AllRankingsGiveZero) {
  const FitResult r = pl_full_mle(Profile(3, all_rankings(3)), {}, Theta{0.5, -0.5, 0.0});
  EXPECT_LT(r.theta.values().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PlFullMle, GradientMatchesLikelihoodDifferences) {
  SeededRng rng(3);
  const Profile p = sample_profile(UtilityFamily::plackett_luce(), Theta{0.5, 1.0, -0.5, 0.0}, 100, rng);
  const FitResult r = pl_full_mle(p);
  ASSERT_TRUE(r.converged);
  auto f = [&](const Eigen::VectorXd& x) { return pl_log_likelihood(p, Theta::from_free(x)); };
  EXPECT_LT(oracle::gradient_richardson(f, r.theta.free()).norm(), 1e-8);
}

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.family = "pl";
  cfg.m = 3;
  cfg.n_grid = {100, 400};
  cfg.trials = 6;
  cfg.seed = 5;
  cfg.estimators = {{"u", EstimatorMethod::kRbcml, 1, "uniform", "uniform-w"},
                    {"mle", EstimatorMethod::kPlFullMle, 1, "uniform", "uniform-w"}};
  cfg.record_timing = false;
  return cfg;
}

}  // namespace

TEST(RunExperiment, DeterministicRowsAndCsv) {
  const ExperimentConfig cfg = small_config();
  const auto a = run_experiment(cfg);
  ExperimentConfig parallel = cfg;
  parallel.workers = 3;
  const auto b = run_experiment(parallel);
  std::ostringstream oa, ob;
  write_results_csv(oa, a.rows);
  write_results_csv(ob, b.rows);
  EXPECT_EQ(oa.str(), ob.str());
  EXPECT_EQ(oa.str().substr(0, oa.str().find('\n')), "estimator,n,n_mse_mean,n_mse_stderr,runtime_mean_s,failures");
  ASSERT_EQ(a.rows.size(), 4u);
  EXPECT_EQ(a.rows[0].estimator, "u");
  EXPECT_EQ(a.rows[3].n, 400u);
  EXPECT_EQ(a.trials.size(), 24u);
}

TEST(RunExperiment, EstimatorsShareProfilesAndMatchDirectFit) {
  ExperimentConfig cfg = small_config();
  cfg.n_grid = {200};
  cfg.trials = 1;
  cfg.theta0 = Theta{0.5, 0.2, 0.0};
  const auto report = run_experiment(cfg);
  SeededRng rng = SeededRng::derive(cfg.seed, 0);
  const Profile p = sample_profile(UtilityFamily::plackett_luce(), *cfg.theta0, 200, rng);
  EXPECT_EQ(*report.trials[1].estimate, pl_full_mle(p).theta);
  EXPECT_NEAR(report.rows[1].n_mse_mean, n_mse(pl_full_mle(p).theta, *cfg.theta0, 200), 1e-15);
}

TEST(RunExperiment, ValidationErrors) {
  ExperimentConfig cfg = small_config();
  cfg.n_grid = {400, 100};
  EXPECT_THROW(run_experiment(cfg), DomainError);
  cfg = small_config();
  cfg.family = "gaussian";
  EXPECT_THROW(run_experiment(cfg), DomainError);
  cfg = small_config();
  cfg.trials = 0;
  EXPECT_THROW(run_experiment(cfg), DomainError);
}

TEST(ExperimentConfigJson, ParsesAndRejects) {
  const char* good = R"({"family": "gaussian", "m": 3, "n_grid": [50, 100], "trials": 2, "seed": 1,
    "estimators": [{"name": "rbcml", "label": "g", "T": 1}], "timing": false, "theta0": [1, 0.5, 0]})";
  std::istringstream in(good);
  const ExperimentConfig cfg = read_experiment_config(in);
  EXPECT_EQ(cfg.family, "gaussian");
  EXPECT_EQ(cfg.n_grid.size(), 2u);
  EXPECT_FALSE(cfg.record_timing);
  EXPECT_NEAR((*cfg.theta0)[0], 1.0, 0.0);

  auto error_of = [](const std::string& text) {
    std::istringstream s(text);
    try {
      read_experiment_config(s);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string base = R"("family": "pl", "m": 3, "n_grid": [10], "trials": 1, "seed": 1)";
  EXPECT_NE(error_of("{" + base + R"(, "estimators": [{"name": "gmm"}]})").find("estimators[0].name"), std::string::npos);
  EXPECT_NE(error_of("{" + base + R"(, "estimators": [{"name": "rbcml", "breaking": "nope"}]})").find("estimators[0].breaking"),
            std::string::npos);
  EXPECT_NE(error_of("{" + base + R"(, "estimators": [], "extra": 1})").find("extra"), std::string::npos);
  EXPECT_NE(error_of(R"({"family": "pl", "m": 3, "n_grid": [10, 5], "trials": 1, "seed": 1, "estimators": [{"name": "rbcml"}]})")
                .find("n_grid[1]"),
            std::string::npos);
  EXPECT_NE(error_of("{not json").find("JSON"), std::string::npos);
  EXPECT_NE(error_of(R"({"family": "gaussian", "m": 3, "n_grid": [10], "trials": 1, "seed": 1, "estimators": [{"name": "pl-full-mle"}]})")
                .find("estimators[0].name"),
            std::string::npos);
}

TEST(TrialsJsonl, OneLinePerTrial) {
  ExperimentConfig cfg = small_config();
  cfg.n_grid = {50};
  cfg.trials = 2;
  const auto report = run_experiment(cfg);
  std::ostringstream out;
  write_trials_jsonl(out, cfg, report.trials);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("theta0"));
    EXPECT_TRUE(j.contains("estimate"));
    EXPECT_TRUE(j.contains("mse"));
    EXPECT_EQ(j["seed"], 5);
    ++lines;
  }
  EXPECT_EQ(lines, 4);
}
