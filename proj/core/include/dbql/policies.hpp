#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dbql/gridworld.hpp"
#include "dbql/rng.hpp"

namespace dbql {

struct QUpdate {
  double q_new = 0.0;
  double delta_q = 0.0;  ///< |q_new - q_old|
};

/// Q-learning update toward reward + gamma * max_next_q with step size alpha.
inline QUpdate q_update(double q_old, double reward, double max_next_q, double alpha,
                        double gamma) noexcept {
  const double step = alpha * (reward + gamma * max_next_q - q_old);
  const double q_new = q_old + step;
  return {q_new, step < 0 ? -step : step};
}

/// Linear learning-rate and inverse-temperature schedules over a horizon.
struct Schedules {
  double alpha0 = 0.035;
  double alpha_final = 0.0;
  double beta0 = 1.0;
  double beta_final = 5.0;
  std::uint64_t horizon = 20000;

  /// Throws ContractViolation unless alpha stays in [0,1] and beta >= 0.
  /// A zero horizon is accepted here (an empty run); experiment configs
  /// require at least one step.
  void validate() const;
  friend bool operator==(const Schedules&, const Schedules&) = default;
};

struct ScheduleValues {
  double alpha;
  double beta;
};

/// Linear interpolation at step t in [0, horizon]; t > horizon throws.
ScheduleValues schedule_at(const Schedules& sched, std::uint64_t t);

/// Running mean of observed |dQ| per state-action pair, and visit counts.
struct AgentBanditState {
  std::vector<double> mean_dq;
  std::vector<std::uint32_t> count;

  AgentBanditState() = default;
  explicit AgentBanditState(std::size_t num_pairs) : mean_dq(num_pairs, 0.0), count(num_pairs, 0) {}

  std::size_t num_pairs() const noexcept { return mean_dq.size(); }
  friend bool operator==(const AgentBanditState&, const AgentBanditState&) = default;
};

/// Folds one observation into the running mean: mu += (dq - mu) / count.
/// Negative dq throws ContractViolation.
void record_dq(AgentBanditState& state, PairIndex pair, double delta_q);

/// Boltzmann distribution exp(beta * mu) / sum exp(beta * mu) over every
/// entry of `mean_dq`, evaluated with the maximum subtracted first.
std::vector<double> softmax_probs(std::span<const double> mean_dq, double beta);

/// Writes unnormalised weights exp(beta * (mu - max mu)) into `out` and
/// returns their sum. Entries with `excluded[i] != 0` get weight 0 and do
/// not take part in the maximum. Returns 0 if every entry is excluded.
double softmax_weights(std::span<const double> mean_dq, double beta, std::span<double> out,
                       std::span<const std::uint8_t> excluded = {});

/// Index i with probability weights[i] / total, using one uniform draw.
/// `total` must be the (positive) sum of the weights.
std::size_t sample_weighted(std::span<const double> weights, double total, Rng& rng);

/// Action for state s: uniform among the four with probability epsilon,
/// otherwise a greedy action with uniform tie-breaking.
Action epsilon_greedy(const QTable& q, std::size_t state, double epsilon, Rng& rng);

}  // namespace dbql
