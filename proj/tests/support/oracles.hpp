#pragma once

// Independent reference computations used by the unit and acceptance
// suites. Nothing here calls into the code path it is used to check.

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dbql/gridworld.hpp"

namespace dbql::testing {

/// Expected immediate reward of every pair, written directly from the
/// environment rules rather than from transition_model().
inline std::vector<double> expected_reward_table(const GridSpec& spec) {
  std::vector<double> r(spec.num_pairs(), 0.0);
  for (int row = 0; row < spec.height; ++row)
    for (int col = 0; col < spec.width; ++col)
      for (std::size_t a = 0; a < 4; ++a) {
        const std::size_t idx = (static_cast<std::size_t>(row) * spec.width + col) * 4 + a;
        bool special = false;
        for (const auto& sc : spec.specials)
          if (sc.source.row == row && sc.source.col == col) {
            r[idx] = sc.success_prob * sc.reward;
            special = true;
          }
        if (special) continue;
        const bool wall = (a == 0 && row == 0) || (a == 1 && row == spec.height - 1) || (a == 2 && col == 0) ||
                          (a == 3 && col == spec.width - 1);
        r[idx] = wall ? spec.wall_penalty : spec.step_reward;
      }
  return r;
}

/// Exact action values of a fixed deterministic policy, by solving the
/// linear system (I - gamma P_pi) q = r with a dense LU factorisation.
/// `policy[s]` is the action taken in flat state s after the first step.
inline std::vector<double> policy_evaluation(const GridSpec& spec, std::span<const Action> policy, double gamma) {
  const std::size_t k = spec.num_pairs();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  for (const auto& [s, act] : enumerate_pairs(spec)) {
    const auto row = static_cast<Eigen::Index>(pair_index(spec, s, act));
    for (const auto& t : transition_model(spec, s, act)) {
      b(row) += t.prob * t.reward;
      const std::size_t next = spec.flat(t.next);
      const auto col = static_cast<Eigen::Index>(next * 4 + static_cast<std::size_t>(policy[next]));
      a(row, col) -= gamma * t.prob;
    }
  }
  const Eigen::VectorXd q = a.partialPivLu().solve(b);
  return {q.data(), q.data() + q.size()};
}

/// 1 - prod_{i<n} (1 - i/k): probability that n uniform picks among k
/// options are not all distinct.
inline double collision_probability(unsigned n, unsigned k) {
  double all_distinct = 1.0;
  for (unsigned i = 0; i < n; ++i) all_distinct *= 1.0 - static_cast<double>(i) / k;
  return 1.0 - all_distinct;
}

/// Expected number of distinct options hit by n uniform picks among k.
inline double expected_distinct(unsigned n, unsigned k) {
  return k * (1.0 - std::pow(1.0 - 1.0 / k, static_cast<double>(n)));
}

/// Joint law of the random-order sequential scheme for two agents:
/// either agent goes first with probability 1/2 and the second samples
/// its distribution restricted to the remaining options. Row-major K x K,
/// entry (i, j) = P(agent 0 picks i, agent 1 picks j).
inline std::vector<double> sequential_two_agent_joint(std::span<const double> p, std::span<const double> q) {
  const std::size_t k = p.size();
  std::vector<double> joint(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      joint[i * k + j] += 0.5 * p[i] * q[j] / (1.0 - q[i]);  // agent 0 first
      joint[i * k + j] += 0.5 * q[j] * p[i] / (1.0 - p[j]);  // agent 1 first
    }
  return joint;
}

/// Upper-tail p-value of Pearson's chi-squared statistic.
inline double chi_squared_p_value(std::span<const std::uint64_t> observed, std::span<const double> expected_prob) {
  std::uint64_t n = 0;
  for (auto o : observed) n += o;
  double stat = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected_prob[i] <= 0.0) continue;
    const double e = expected_prob[i] * static_cast<double>(n);
    stat += (static_cast<double>(observed[i]) - e) * (static_cast<double>(observed[i]) - e) / e;
    ++cells;
  }
  boost::math::chi_squared dist(static_cast<double>(cells - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// |observed frequency - p| within `sigmas` binomial standard deviations.
inline bool within_binomial(std::uint64_t hits, std::uint64_t n, double p, double sigmas = 3.0) {
  const double freq = static_cast<double>(hits) / static_cast<double>(n);
  const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return std::abs(freq - p) <= sigmas * sd + 1e-15;
}

}  // namespace dbql::testing
