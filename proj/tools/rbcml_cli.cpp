// rbcml: generate profiles, fit RBCML, check consistency, run sweeps and
// print the Plackett-Luce Cramer-Rao reference.
//
// Exit codes: 0 success, 1 check found the configuration inconsistent,
// 2 bad input, 3 the fit did not produce a trustworthy estimate.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rbcml/rbcml.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInconsistent = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitFitFailed = 3;

struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<rbcml::Theta> theta_from_option(const std::string& text, std::size_t m) {
  if (text.empty()) return std::nullopt;
  const std::vector<double> values = rbcml::parse_theta_list(text);
  if (values.size() != m) throw BadInput(fmt::format("--theta has {} values, expected {}", values.size(), m));
  rbcml::Theta theta(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(m)));
  return theta;
}

template <class Writer>
void write_to(const std::string& path, Writer&& writer) {
  if (path.empty() || path == "-") {
    writer(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw BadInput(fmt::format("cannot write '{}'", path));
  writer(out);
}

nlohmann::json fit_json(const rbcml::FitResult& fit, bool timing) {
  nlohmann::json out;
  out["theta"] = rbcml::theta_json(fit.theta);
  out["objective"] = fit.objective;
  out["gradient_norm"] = fit.gradient_norm;
  out["iterations"] = fit.iterations;
  out["converged"] = fit.converged;
  if (timing) out["wallclock_s"] = fit.wallclock_seconds;
  out["warnings"] = fit.warnings;
  return out;
}

struct GenerateArgs {
  std::string family = "pl";
  std::size_t m = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string theta;
  std::string out;
  std::string truth;
};

int run_generate(const GenerateArgs& a) {
  const rbcml::UtilityFamily family = rbcml::parse_family(a.family);
  if (a.m < 2) throw BadInput("--m must be at least 2");
  if (a.n < 1) throw BadInput("--n must be at least 1");
  family.check_dimension(a.m);
  rbcml::SeededRng rng(a.seed);
  const std::optional<rbcml::Theta> fixed = theta_from_option(a.theta, a.m);
  const rbcml::Theta theta0 = fixed ? rbcml::Theta(fixed->values()) : rbcml::sample_ground_truth(a.m, rng);
  const rbcml::Profile profile = rbcml::sample_profile(family, theta0, a.n, rng);
  write_to(a.out, [&](std::ostream& out) { rbcml::write_profile(out, profile); });
  if (!a.truth.empty()) {
    write_to(a.truth, [&](std::ostream& out) {
      for (std::size_t i = 0; i < theta0.size(); ++i) out << fmt::format("{}\n", theta0[i]);
    });
  }
  return kExitOk;
}

struct FitArgs {
  std::string profile;
  std::string family = "pl";
  std::string breaking = "uniform";
  std::string weights = "uniform-w";
  std::size_t iterations = 1;
  std::string out;
  bool no_timing = false;
};

int run_fit(const FitArgs& a) {
  std::ifstream in(a.profile);
  if (!in) throw BadInput(fmt::format("cannot open profile '{}'", a.profile));
  const rbcml::Profile profile = rbcml::read_profile(in);
  const rbcml::UtilityFamily family = rbcml::parse_family(a.family);
  family.check_dimension(profile.m());
  if (a.iterations < 1) throw BadInput("--T must be at least 1");
  rbcml::AdaptiveConfig cfg{a.iterations, rbcml::parse_breaking_heuristic(a.breaking, profile.m()),
                            rbcml::parse_weight_heuristic(a.weights, profile.m()), {}};
  const rbcml::AdaptiveResult result = rbcml::adaptive_rbcml(profile, cfg, family);

  nlohmann::json out;
  const bool timing = !a.no_timing;
  if (!result.iterates.empty()) out = fit_json(result.final_fit(), timing);
  out["completed"] = result.completed;
  if (!result.completed) out["failure"] = result.failure;
  out["kappa_evaluations"] = result.kappa_evaluations;
  nlohmann::json iterates = nlohmann::json::array();
  for (const rbcml::FitResult& fit : result.iterates) iterates.push_back(fit_json(fit, timing));
  out["iterates"] = iterates;
  write_to(a.out, [&](std::ostream& s) { s << out.dump(2) << '\n'; });

  if (!result.completed) {
    std::cerr << "rbcml fit: " << result.failure << '\n';
    return kExitFitFailed;
  }
  for (const std::string& warning : result.final_fit().warnings) {
    std::cerr << "rbcml fit: warning: " << warning << '\n';
    if (warning.find("not weakly connected") != std::string::npos) return kExitFitFailed;
  }
  return kExitOk;
}

struct CheckArgs {
  std::string breaking;
  std::string weights;
  std::string family_class;
  std::size_t m = 0;
};

int run_check(const CheckArgs& a) {
  if (a.m < 2) throw BadInput("--m must be at least 2");
  rbcml::FamilyClass family_class;
  if (a.family_class == "pl") {
    family_class = rbcml::FamilyClass::kPlackettLuce;
  } else if (a.family_class == "symmetric-rum") {
    family_class = rbcml::FamilyClass::kSymmetricRum;
  } else {
    throw BadInput(fmt::format("--family-class '{}' (expected pl or symmetric-rum)", a.family_class));
  }
  const rbcml::BreakingGraph g = rbcml::parse_breaking_spec(a.breaking, a.m);
  const rbcml::CmlWeights w = rbcml::parse_weights_spec(a.weights, a.m);
  const rbcml::ConsistencyVerdict verdict = rbcml::check_consistency(family_class, g, w);
  if (verdict.consistent) {
    std::cout << "consistent\n";
    return kExitOk;
  }
  std::string reasons;
  for (const rbcml::ConsistencyReason reason : verdict.reasons) {
    reasons += (reasons.empty() ? "" : ", ") + rbcml::to_string(reason);
  }
  std::cout << "inconsistent: " << reasons << '\n';
  return kExitInconsistent;
}

struct SweepArgs {
  std::string config;
  std::string out;
  std::string trials_jsonl;
  bool no_timing = false;
  std::size_t workers = 0;
};

int run_sweep(const SweepArgs& a) {
  rbcml::ExperimentConfig cfg = rbcml::load_experiment_config(a.config);
  if (!a.out.empty()) cfg.output = a.out;
  if (!a.trials_jsonl.empty()) cfg.trials_output = a.trials_jsonl;
  if (a.no_timing) cfg.record_timing = false;
  if (a.workers > 0) cfg.workers = a.workers;
  const rbcml::ExperimentReport report = rbcml::run_experiment(cfg);

  const bool csv_on_stdout = cfg.output.empty() || cfg.output == "-";
  write_to(cfg.output, [&](std::ostream& out) { rbcml::write_results_csv(out, report.rows); });
  if (!cfg.trials_output.empty()) {
    write_to(cfg.trials_output, [&](std::ostream& out) { rbcml::write_trials_jsonl(out, cfg, report.trials); });
  }
  std::ostream& summary = csv_on_stdout ? std::cerr : std::cout;
  for (const rbcml::ResultRow& row : report.rows) {
    summary << fmt::format("{:>16} n={:<8} n*MSE={:.6g} +- {:.3g}  failures={}\n", row.estimator, row.n,
                           row.n_mse_mean, row.n_mse_stderr, row.failures);
  }
  return kExitOk;
}

struct CrboundArgs {
  std::size_t m = 0;
  std::string theta;
  bool normalize = false;
};

int run_crbound(const CrboundArgs& a) {
  if (a.m < 2) throw BadInput("--m must be at least 2");
  if (a.m > rbcml::kMaxExactEnumerationPl) {
    throw BadInput(fmt::format("--m {} is too large for exact enumeration (at most {})", a.m,
                               rbcml::kMaxExactEnumerationPl));
  }
  const std::optional<rbcml::Theta> theta = theta_from_option(a.theta, a.m);
  const double value = rbcml::cramer_rao_trace_pl(theta ? *theta : rbcml::Theta::zeros(a.m), a.normalize);
  std::cout << fmt::format("{}\n", value);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank-breaking composite marginal likelihood estimation for random utility models"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "Sample a ranking profile");
  generate->add_option("--family", gen.family, "pl | gaussian | gaussian:<s1,...,sm>")->capture_default_str();
  generate->add_option("--m", gen.m, "Number of alternatives")->required();
  generate->add_option("--n", gen.n, "Number of rankings")->required();
  generate->add_option("--seed", gen.seed, "RNG seed")->required();
  generate->add_option("--theta", gen.theta, "Comma-separated ground truth (sampled when absent)");
  generate->add_option("--out", gen.out, "Profile output path (stdout when absent)");
  generate->add_option("--truth", gen.truth, "Write the ground truth here, one value per line");

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Estimate parameters from a profile");
  fit_cmd->add_option("--profile", fit.profile, "Profile file")->required();
  fit_cmd->add_option("--family", fit.family, "pl | gaussian | gaussian:<s1,...,sm>")->capture_default_str();
  fit_cmd->add_option("--breaking", fit.breaking, "uniform | position:<k> | position-union:<a...> | file")
      ->capture_default_str();
  fit_cmd->add_option("--weights", fit.weights, "uniform-w | pl-heuristic-w | file")->capture_default_str();
  fit_cmd->add_option("-T,--T,--iterations", fit.iterations, "Adaptive iterations")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "JSON output path (stdout when absent)");
  fit_cmd->add_flag("--no-timing", fit.no_timing, "Omit wallclock fields for reproducible output");

  CheckArgs chk;
  CLI::App* check = app.add_subcommand("check", "Decide consistency of a breaking graph and weights");
  check->add_option("--breaking", chk.breaking, "Breaking preset or file")->required();
  check->add_option("--weights", chk.weights, "Weights preset or file")->required();
  check->add_option("--family-class", chk.family_class, "pl | symmetric-rum")->required();
  check->add_option("--m", chk.m, "Number of alternatives")->required();

  SweepArgs swp;
  CLI::App* sweep = app.add_subcommand("sweep", "Run a seeded Monte-Carlo experiment");
  sweep->add_option("config", swp.config, "JSON experiment config")->required();
  sweep->add_option("--out", swp.out, "CSV output path (overrides the config)");
  sweep->add_option("--trials-jsonl", swp.trials_jsonl, "Per-trial JSONL path (overrides the config)");
  sweep->add_flag("--no-timing", swp.no_timing, "Record zero runtimes for reproducible output");
  sweep->add_option("--workers", swp.workers, "Worker threads (overrides the config)");

  CrboundArgs crb;
  CLI::App* crbound = app.add_subcommand("crbound", "Plackett-Luce Cramer-Rao reference for n x MSE");
  crbound->add_option("--m", crb.m, "Number of alternatives")->required();
  crbound->add_option("--theta", crb.theta, "Comma-separated parameters (zeros when absent)");
  crbound->add_flag("--normalize", crb.normalize, "Divide the trace by m - 1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*generate) return run_generate(gen);
    if (*fit_cmd) return run_fit(fit);
    if (*check) return run_check(chk);
    if (*sweep) return run_sweep(swp);
    if (*crbound) return run_crbound(crb);
  } catch (const BadInput& e) {
    std::cerr << "rbcml: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const rbcml::DivergedError& e) {
    std::cerr << "rbcml: " << e.what() << '\n';
    return kExitFitFailed;
  } catch (const rbcml::Error& e) {
    std::cerr << "rbcml: " << e.what() << '\n';
    return kExitBadInput;
  }
  return kExitBadInput;
}
