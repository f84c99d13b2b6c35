#pragma once

// Named presets and file paths accepted wherever a family, breaking graph
// or weight vector is selected by string:
//
//   family:    pl | plackett-luce | gaussian | gaussian:<s1,...,sm>
//   breaking:  uniform | position:<k> | position-union:<a1,...,a(m-1)> | <file>
//   weights:   uniform | uniform-w | pl-heuristic-w | <file>
//
// Positions and alternatives are 1-based in every text form.

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "rbcml/adaptive.hpp"
#include "rbcml/breaking.hpp"
#include "rbcml/cml.hpp"
#include "rbcml/errors.hpp"
#include "rbcml/model.hpp"

namespace rbcml {

namespace detail {

inline std::vector<double> parse_number_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string token(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(token, &used);
    } catch (const std::exception&) {
      throw ParseError(fmt::format("{}: '{}' is not a number", what, token));
    }
    if (used != token.size()) throw ParseError(fmt::format("{}: '{}' is not a number", what, token));
    out.push_back(value);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool starts_with(std::string_view text, std::string_view prefix) {
  return text.substr(0, prefix.size()) == prefix;
}

inline std::ifstream open_spec_file(const std::string& path, std::string_view what) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("unknown {} '{}' (not a preset and not a readable file)", what, path));
  return in;
}

}  // namespace detail

inline UtilityFamily parse_family(const std::string& spec) {
  if (spec == "pl" || spec == "plackett-luce") return UtilityFamily::plackett_luce();
  if (spec == "gaussian") return UtilityFamily::gaussian();
  if (detail::starts_with(spec, "gaussian:")) {
    try {
      return UtilityFamily::gaussian(detail::parse_number_list(spec.substr(9), "gaussian scales"));
    } catch (const DomainError& e) {
      throw ParseError(e.what());
    }
  }
  throw ParseError(fmt::format("unknown family '{}' (expected pl or gaussian)", spec));
}

inline std::vector<double> parse_theta_list(const std::string& text) {
  return detail::parse_number_list(text, "theta");
}

inline BreakingGraph parse_breaking_spec(const std::string& spec, std::size_t m) {
  try {
    if (spec == "uniform") return uniform_breaking(m);
    if (detail::starts_with(spec, "position:")) {
      const std::vector<double> k = detail::parse_number_list(spec.substr(9), "position");
      if (k.size() != 1 || k[0] < 1 || k[0] != static_cast<double>(static_cast<std::size_t>(k[0]))) {
        throw ParseError(fmt::format("breaking '{}': position must be one integer", spec));
      }
      return position_k_breaking(m, static_cast<std::size_t>(k[0]) - 1);
    }
    if (detail::starts_with(spec, "position-union:")) {
      const std::vector<double> alphas = detail::parse_number_list(spec.substr(15), "position-union");
      if (alphas.size() + 1 != m) {
        throw ParseError(fmt::format("breaking '{}': expected {} coefficients for m = {}", spec, m - 1, m));
      }
      std::vector<std::pair<double, BreakingGraph>> terms;
      for (std::size_t k = 0; k < alphas.size(); ++k) terms.emplace_back(alphas[k], position_k_breaking(m, k));
      return weighted_union(terms);
    }
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(fmt::format("breaking '{}': {}", spec, e.what()));
  }
  std::ifstream in = detail::open_spec_file(spec, "breaking");
  BreakingGraph g = read_breaking(in);
  if (g.m() != m) throw ParseError(fmt::format("breaking file '{}' has m = {}, expected {}", spec, g.m(), m));
  return g;
}

inline BreakingHeuristic parse_breaking_heuristic(const std::string& spec, std::size_t m) {
  return constant_breaking(parse_breaking_spec(spec, m));
}

inline WeightHeuristic parse_weight_heuristic(const std::string& spec, std::size_t m) {
  if (spec == "uniform" || spec == "uniform-w") return constant_weights(uniform_weights(m));
  if (spec == "pl-heuristic-w") return heuristic_w_pl;
  std::ifstream in = detail::open_spec_file(spec, "weights");
  CmlWeights w = [&] {
    try {
      return read_weights(in);
    } catch (const InvariantError& e) {
      throw ParseError(fmt::format("weights file '{}': {}", spec, e.what()));
    }
  }();
  if (w.m() != m) throw ParseError(fmt::format("weights file '{}' has m = {}, expected {}", spec, w.m(), m));
  return constant_weights(std::move(w));
}

// The weight vector a spec denotes; heuristics are evaluated at `theta`.
inline CmlWeights parse_weights_spec(const std::string& spec, std::size_t m,
                                     const std::optional<Theta>& theta = std::nullopt) {
  return parse_weight_heuristic(spec, m)(theta ? *theta : Theta::zeros(m));
}

}  // namespace rbcml
