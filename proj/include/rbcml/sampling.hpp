#pragma once

// Ground-truth parameters, synthetic profiles and the profile text format.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rbcml/errors.hpp"
#include "rbcml/model.hpp"
#include "rbcml/rng.hpp"

namespace rbcml {

// theta_i ~ Uniform[0, 5] independently, then shifted so the last entry is 0.
inline Theta sample_ground_truth(std::size_t m, SeededRng& rng) {
  if (m < 2) throw DomainError("ground truth needs m >= 2");
  Eigen::VectorXd values(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < values.size(); ++i) values[i] = rng.uniform(0.0, 5.0);
  return Theta(std::move(values));
}

// Draws one utility per alternative and sorts descending; ties go to the
// smaller alternative index.
inline Ranking sample_ranking(const UtilityFamily& family, const Theta& theta, SeededRng& rng) {
  const std::size_t m = theta.size();
  family.check_dimension(m);
  std::vector<double> utility(m);
  for (std::size_t a = 0; a < m; ++a) utility[a] = theta[a] + family.sample_noise(a, rng);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return utility[a] > utility[b]; });
  return Ranking(std::move(order));
}

// Plackett-Luce sequential-choice sampler: each position picks among the
// remaining alternatives with probability proportional to exp(theta).
inline Ranking sample_ranking_pl_sequential(const Theta& theta, SeededRng& rng) {
  const std::size_t m = theta.size();
  std::vector<std::size_t> remaining(m);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  const double top = theta.values().maxCoeff();
  std::vector<std::size_t> order;
  order.reserve(m);
  while (remaining.size() > 1) {
    double total = 0.0;
    for (std::size_t a : remaining) total += std::exp(theta[a] - top);
    double target = rng.uniform() * total;
    std::size_t pick = remaining.size() - 1;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      target -= std::exp(theta[remaining[k]] - top);
      if (target < 0.0) {
        pick = k;
        break;
      }
    }
    order.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  order.push_back(remaining.front());
  return Ranking(std::move(order));
}

inline Profile sample_profile(const UtilityFamily& family, const Theta& theta, std::size_t n,
                              SeededRng& rng) {
  if (n < 1) throw DomainError("profile size must be at least 1");
  std::vector<Ranking> rankings;
  rankings.reserve(n);
  for (std::size_t j = 0; j < n; ++j) rankings.push_back(sample_ranking(family, theta, rng));
  return Profile(theta.size(), std::move(rankings));
}

// Text format: "m n" on the first line, then one ranking per line as
// 1-based alternative indices, top first.
inline void write_profile(std::ostream& out, const Profile& profile) {
  out << profile.m() << ' ' << profile.n() << '\n';
  for (const Ranking& r : profile.rankings()) {
    for (std::size_t k = 0; k < r.size(); ++k) out << (k ? " " : "") << r[k] + 1;
    out << '\n';
  }
}

inline Profile read_profile(std::istream& in) {
  std::string line;
  auto next_line = [&](std::size_t& line_no) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  std::size_t line_no = 0;
  if (!next_line(line_no)) throw ParseError("profile: empty input");
  std::istringstream header(line);
  long long m = 0;
  long long n = 0;
  std::string extra;
  if (!(header >> m >> n) || (header >> extra) || m < 2 || n < 1) {
    throw ParseError(fmt::format("profile line {}: expected 'm n' with m >= 2, n >= 1", line_no));
  }
  std::vector<Ranking> rankings;
  rankings.reserve(static_cast<std::size_t>(n));
  for (long long j = 0; j < n; ++j) {
    if (!next_line(line_no)) {
      throw ParseError(fmt::format("profile: expected {} rankings, found {}", n, j));
    }
    std::istringstream row(line);
    std::vector<std::size_t> order;
    long long a = 0;
    while (row >> a) {
      if (a < 1 || a > m) {
        throw ParseError(fmt::format("profile line {}: alternative {} out of range 1..{}", line_no, a, m));
      }
      order.push_back(static_cast<std::size_t>(a - 1));
    }
    if (!row.eof()) throw ParseError(fmt::format("profile line {}: non-integer token", line_no));
    if (order.size() != static_cast<std::size_t>(m)) {
      throw ParseError(fmt::format("profile line {}: expected {} alternatives, got {}", line_no, m, order.size()));
    }
    try {
      rankings.emplace_back(std::move(order));
    } catch (const InvariantError&) {
      throw ParseError(fmt::format("profile line {}: not a permutation", line_no));
    }
  }
  if (next_line(line_no)) {
    throw ParseError(fmt::format("profile line {}: more rankings than the declared n = {}", line_no, n));
  }
  return Profile(static_cast<std::size_t>(m), std::move(rankings));
}

}  // namespace rbcml
