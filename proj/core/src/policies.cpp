#include "dbql/policies.hpp"

#include <array>
#include <cmath>
#include <string>

#include "dbql/errors.hpp"

namespace dbql {

void Schedules::validate() const {
  const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  // Linear interpolation stays within the endpoints' hull.
  if (!in_unit(alpha0) || !in_unit(alpha_final))
    throw ContractViolation("alpha schedule must stay within [0, 1]");
  if (!(beta0 >= 0.0) || !(beta_final >= 0.0))
    throw ContractViolation("beta schedule must be non-negative");
}

ScheduleValues schedule_at(const Schedules& sched, std::uint64_t t) {
  if (t > sched.horizon)
    throw ContractViolation("schedule queried at t=" + std::to_string(t) + " beyond horizon " +
                            std::to_string(sched.horizon));
  if (sched.horizon == 0) return {sched.alpha0, sched.beta0};
  const double frac = static_cast<double>(t) / static_cast<double>(sched.horizon);
  return {sched.alpha0 + (sched.alpha_final - sched.alpha0) * frac,
          sched.beta0 + (sched.beta_final - sched.beta0) * frac};
}

void record_dq(AgentBanditState& state, PairIndex pair, double delta_q) {
  if (!(delta_q >= 0.0)) throw ContractViolation("delta_q must be non-negative");
  if (pair >= state.num_pairs()) throw ContractViolation("pair index out of range");
  const std::uint32_t n = ++state.count[pair];
  state.mean_dq[pair] += (delta_q - state.mean_dq[pair]) / static_cast<double>(n);
}

std::vector<double> softmax_probs(std::span<const double> mean_dq, double beta) {
  if (mean_dq.empty()) throw ContractViolation("softmax over an empty table");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ContractViolation("beta must be finite and >= 0");
  double m = mean_dq[0];
  for (double mu : mean_dq) {
    if (!std::isfinite(mu)) throw ContractViolation("non-finite entry in mean_dq");
    m = mu > m ? mu : m;
  }
  std::vector<double> p(mean_dq.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(beta * (mean_dq[i] - m));
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::size_t sample_weighted(std::span<const double> weights, double total, Rng& rng) {
  const double target = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  // Rounding can leave target marginally above the running sum.
  return last_positive;
}

Action epsilon_greedy(const QTable& q, std::size_t state, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("epsilon must lie in [0, 1]");
  if (state >= q.num_states()) throw ContractViolation("state index out of range");
  if (rng.uniform() < epsilon) return kActions[rng.below(kNumActions)];
  const double best = q.max_at(state);
  std::array<Action, kNumActions> ties{};
  std::size_t n = 0;
  for (Action a : kActions)
    if (q.at(state, a) == best) ties[n++] = a;
  return n == 1 ? ties[0] : ties[rng.below(n)];
}

}  // namespace dbql
