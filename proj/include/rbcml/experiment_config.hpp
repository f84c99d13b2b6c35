#pragma once

// JSON experiment configs and per-trial JSONL output.
//
// {
//   "family": "pl",
//   "m": 4,
//   "n_grid": [1000, 10000],
//   "trials": 100,
//   "seed": 7,
//   "estimators": [
//     {"name": "rbcml", "label": "uniform", "T": 1, "breaking": "uniform", "weights": "uniform-w"},
//     {"name": "pl-full-mle"}
//   ],
//   "theta0": [1, 0.5, 0.2, 0],          optional, sampled per trial otherwise
//   "output": "results.csv",             optional
//   "trials_jsonl": "trials.jsonl",      optional
//   "timing": true,                      optional
//   "workers": 1                         optional
// }

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rbcml/errors.hpp"
#include "rbcml/eval.hpp"
#include "rbcml/specs.hpp"

namespace rbcml {

namespace detail {

[[noreturn]] inline void config_error(const std::string& field, const std::string& message) {
  throw ParseError(fmt::format("config field '{}': {}", field, message));
}

inline std::uint64_t json_unsigned(const nlohmann::json& v, const std::string& field, std::uint64_t min) {
  if (!v.is_number_integer()) config_error(field, "expected an integer");
  if (v.is_number_unsigned()) {
    const auto value = v.get<std::uint64_t>();
    if (value < min) config_error(field, fmt::format("must be at least {}", min));
    return value;
  }
  const auto value = v.get<std::int64_t>();
  if (value < 0 || static_cast<std::uint64_t>(value) < min) {
    config_error(field, fmt::format("must be at least {}", min));
  }
  return static_cast<std::uint64_t>(value);
}

inline std::string json_string(const nlohmann::json& v, const std::string& field) {
  if (!v.is_string()) config_error(field, "expected a string");
  return v.get<std::string>();
}

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                                const std::string& prefix) {
  for (const auto& item : obj.items()) {
    if (!known.count(item.key())) config_error(prefix + item.key(), "unknown field");
  }
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
  using detail::config_error;
  if (!doc.is_object()) config_error("<root>", "expected a JSON object");
  detail::reject_unknown_keys(doc,
                              {"family", "m", "n_grid", "trials", "seed", "estimators", "theta0", "output",
                               "trials_jsonl", "timing", "workers"},
                              "");
  for (const char* key : {"family", "m", "n_grid", "trials", "seed", "estimators"}) {
    if (!doc.contains(key)) config_error(key, "missing required field");
  }

  ExperimentConfig cfg;
  cfg.family = detail::json_string(doc["family"], "family");
  UtilityFamily family = UtilityFamily::plackett_luce();
  try {
    family = parse_family(cfg.family);
  } catch (const ParseError& e) {
    config_error("family", e.what());
  }
  cfg.m = detail::json_unsigned(doc["m"], "m", 2);
  try {
    family.check_dimension(cfg.m);
  } catch (const Error& e) {
    config_error("family", e.what());
  }

  const nlohmann::json& grid = doc["n_grid"];
  if (!grid.is_array() || grid.empty()) config_error("n_grid", "expected a nonempty array");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::string field = fmt::format("n_grid[{}]", k);
    cfg.n_grid.push_back(detail::json_unsigned(grid[k], field, 1));
    if (k > 0 && cfg.n_grid[k] <= cfg.n_grid[k - 1]) config_error(field, "n_grid must be strictly increasing");
  }
  cfg.trials = detail::json_unsigned(doc["trials"], "trials", 1);
  cfg.seed = detail::json_unsigned(doc["seed"], "seed", 0);

  const nlohmann::json& estimators = doc["estimators"];
  if (!estimators.is_array() || estimators.empty()) config_error("estimators", "expected a nonempty array");
  std::set<std::string> labels;
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    const std::string prefix = fmt::format("estimators[{}].", e);
    const nlohmann::json& item = estimators[e];
    if (!item.is_object()) config_error(fmt::format("estimators[{}]", e), "expected an object");
    detail::reject_unknown_keys(item, {"name", "label", "T", "breaking", "weights"}, prefix);
    if (!item.contains("name")) config_error(prefix + "name", "missing required field");
    EstimatorSpec spec;
    const std::string name = detail::json_string(item["name"], prefix + "name");
    if (name == "rbcml") {
      spec.method = EstimatorMethod::kRbcml;
    } else if (name == "pl-full-mle") {
      spec.method = EstimatorMethod::kPlFullMle;
      if (!family.is_plackett_luce()) config_error(prefix + "name", "pl-full-mle requires family pl");
      for (const char* key : {"T", "breaking", "weights"}) {
        if (item.contains(key)) config_error(prefix + key, "not used by pl-full-mle");
      }
    } else {
      config_error(prefix + "name", fmt::format("unknown estimator '{}' (expected rbcml or pl-full-mle)", name));
    }
    spec.label = item.contains("label") ? detail::json_string(item["label"], prefix + "label") : name;
    if (spec.label.empty() || spec.label.find_first_of(",\"\n") != std::string::npos) {
      config_error(prefix + "label", "must be nonempty and free of commas, quotes and newlines");
    }
    if (!labels.insert(spec.label).second) config_error(prefix + "label", fmt::format("duplicate label '{}'", spec.label));
    if (item.contains("T")) spec.iterations = detail::json_unsigned(item["T"], prefix + "T", 1);
    if (item.contains("breaking")) spec.breaking = detail::json_string(item["breaking"], prefix + "breaking");
    if (item.contains("weights")) spec.weights = detail::json_string(item["weights"], prefix + "weights");
    if (spec.method == EstimatorMethod::kRbcml) {
      try {
        parse_breaking_spec(spec.breaking, cfg.m);
      } catch (const Error& err) {
        config_error(prefix + "breaking", err.what());
      }
      try {
        parse_weight_heuristic(spec.weights, cfg.m);
      } catch (const Error& err) {
        config_error(prefix + "weights", err.what());
      }
    }
    cfg.estimators.push_back(std::move(spec));
  }

  if (doc.contains("theta0")) {
    const nlohmann::json& t = doc["theta0"];
    if (!t.is_array() || t.size() != cfg.m) config_error("theta0", fmt::format("expected an array of {} numbers", cfg.m));
    Eigen::VectorXd values(static_cast<Eigen::Index>(cfg.m));
    for (std::size_t i = 0; i < cfg.m; ++i) {
      if (!t[i].is_number()) config_error(fmt::format("theta0[{}]", i), "expected a number");
      values[static_cast<Eigen::Index>(i)] = t[i].get<double>();
    }
    cfg.theta0 = Theta(values);
  }
  if (doc.contains("output")) cfg.output = detail::json_string(doc["output"], "output");
  if (doc.contains("trials_jsonl")) cfg.trials_output = detail::json_string(doc["trials_jsonl"], "trials_jsonl");
  if (doc.contains("timing")) {
    if (!doc["timing"].is_boolean()) config_error("timing", "expected true or false");
    cfg.record_timing = doc["timing"].get<bool>();
  }
  if (doc.contains("workers")) cfg.workers = detail::json_unsigned(doc["workers"], "workers", 1);
  return cfg;
}

inline ExperimentConfig read_experiment_config(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  return parse_experiment_config(doc);
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open config '{}'", path));
  return read_experiment_config(in);
}

inline nlohmann::json theta_json(const Theta& theta) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < theta.size(); ++i) out.push_back(theta[i]);
  return out;
}

// One JSON object per trial and estimator.
inline void write_trials_jsonl(std::ostream& out, const ExperimentConfig& cfg,
                               const std::vector<TrialRecord>& trials) {
  for (const TrialRecord& rec : trials) {
    nlohmann::json line;
    line["estimator"] = rec.estimator;
    line["n"] = rec.n;
    line["trial"] = rec.trial;
    line["seed"] = cfg.seed;
    line["stream"] = rec.stream;
    line["theta0"] = theta_json(rec.theta0);
    line["estimate"] = rec.estimate ? theta_json(*rec.estimate) : nlohmann::json(nullptr);
    line["mse"] = rec.estimate ? nlohmann::json(rec.mse) : nlohmann::json(nullptr);
    if (cfg.record_timing) line["runtime_s"] = rec.runtime_s;
    if (!rec.error.empty()) line["error"] = rec.error;
    out << line.dump() << '\n';
  }
}

}  // namespace rbcml
