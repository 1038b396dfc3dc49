#include "dbql/multiagent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dbql/errors.hpp"
#include "dbql/metrics.hpp"

namespace dbql {

namespace {

void check_streams(std::size_t agents, std::size_t streams) {
  if (streams < agents) throw ContractViolation("one selection stream per agent is required");
}

std::vector<std::uint32_t> draw_permutation(std::size_t n, Rng& rng) {
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

// Uniform pick among the entries of `taken` that are still zero.
PairIndex pick_untaken(std::span<const std::uint8_t> taken, std::size_t remaining, Rng& rng) {
  std::uint64_t k = rng.below(remaining);
  for (PairIndex p = 0; p < taken.size(); ++p) {
    if (taken[p]) continue;
    if (k-- == 0) return p;
  }
  throw ContractViolation("no untaken pair left");
}

// Sequential restricted sampling shared by the bandit and the generic
// weighted sampler. `fill(agent, taken, out)` writes the agent's
// restricted weights and returns their sum.
template <typename FillWeights>
std::vector<PairIndex> sample_distinct(std::size_t n_agents, std::size_t n_pairs, Rng& permutation_rng,
                                       std::span<Rng> selection_rngs, std::vector<std::uint32_t>* order_out,
                                       FillWeights&& fill) {
  if (n_agents > n_pairs)
    throw InfeasibleError("conflict-free selection needs at most " + std::to_string(n_pairs) +
                          " agents, got " + std::to_string(n_agents));
  check_streams(n_agents, selection_rngs.size());
  auto order = draw_permutation(n_agents, permutation_rng);
  std::vector<PairIndex> proposals(n_agents);
  std::vector<std::uint8_t> taken(n_pairs, 0);
  std::vector<double> weights(n_pairs);
  std::size_t remaining = n_pairs;
  for (std::uint32_t agent : order) {
    Rng& rng = selection_rngs[agent];
    const double total = fill(agent, std::span<const std::uint8_t>(taken), std::span<double>(weights));
    PairIndex chosen;
    if (total > 0.0 && std::isfinite(total))
      chosen = sample_weighted(weights, total, rng);
    else
      chosen = pick_untaken(taken, remaining, rng);
    proposals[agent] = chosen;
    taken[chosen] = 1;
    --remaining;
  }
  if (order_out) *order_out = std::move(order);
  return proposals;
}

}  // namespace

std::string_view to_string(SelectionPolicy p) noexcept {
  return p == SelectionPolicy::Bandit ? "bandit" : "uniform";
}

std::string_view to_string(ConflictMode c) noexcept { return c == ConflictMode::Free ? "free" : "allowed"; }

std::string label(const Mode& m) {
  std::string s = m.policy == SelectionPolicy::Bandit ? "bandit" : "uniform random";
  s += m.conflict == ConflictMode::Free ? "/conflict-free" : "/conflict";
  return s;
}

std::vector<PairIndex> select_conflict(std::span<const AgentBanditState> agents, SelectionPolicy policy,
                                       double beta, std::span<Rng> selection_rngs) {
  if (agents.empty()) throw ContractViolation("at least one agent is required");
  check_streams(agents.size(), selection_rngs.size());
  const std::size_t k = agents.front().num_pairs();
  std::vector<PairIndex> proposals(agents.size());
  if (policy == SelectionPolicy::UniformRandom) {
    for (std::size_t i = 0; i < agents.size(); ++i) proposals[i] = selection_rngs[i].below(k);
    return proposals;
  }
  std::vector<double> weights(k);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const double total = softmax_weights(agents[i].mean_dq, beta, weights);
    proposals[i] = sample_weighted(weights, total, selection_rngs[i]);
  }
  return proposals;
}

std::vector<PairIndex> select_conflict_free(std::span<const AgentBanditState> agents,
                                            SelectionPolicy policy, double beta, Rng& permutation_rng,
                                            std::span<Rng> selection_rngs, std::vector<std::uint32_t>* order) {
  if (agents.empty()) throw ContractViolation("at least one agent is required");
  const std::size_t k = agents.front().num_pairs();

  if (policy == SelectionPolicy::UniformRandom) {
    if (agents.size() > k)
      throw InfeasibleError("conflict-free selection needs at most " + std::to_string(k) + " agents, got " +
                            std::to_string(agents.size()));
    check_streams(agents.size(), selection_rngs.size());
    // Uniform over the remaining pairs; swap-remove keeps this O(1) per agent.
    auto perm = draw_permutation(agents.size(), permutation_rng);
    std::vector<PairIndex> available(k);
    std::iota(available.begin(), available.end(), PairIndex{0});
    std::vector<PairIndex> proposals(agents.size());
    std::size_t remaining = k;
    for (std::uint32_t agent : perm) {
      const auto j = selection_rngs[agent].below(remaining);
      proposals[agent] = available[j];
      available[j] = available[--remaining];
    }
    if (order) *order = std::move(perm);
    return proposals;
  }

  return sample_distinct(agents.size(), k, permutation_rng, selection_rngs, order,
                         [&](std::uint32_t agent, std::span<const std::uint8_t> taken, std::span<double> out) {
                           return softmax_weights(agents[agent].mean_dq, beta, out, taken);
                         });
}

std::vector<PairIndex> select_distinct_weighted(std::span<const std::vector<double>> weights,
                                                Rng& permutation_rng, std::span<Rng> selection_rngs,
                                                std::vector<std::uint32_t>* order) {
  if (weights.empty()) throw ContractViolation("at least one agent is required");
  const std::size_t k = weights.front().size();
  for (const auto& w : weights) {
    if (w.size() != k) throw ContractViolation("weight vectors must share one length");
    for (double x : w)
      if (!(x >= 0.0) || !std::isfinite(x)) throw ContractViolation("weights must be finite and >= 0");
  }
  return sample_distinct(weights.size(), k, permutation_rng, selection_rngs, order,
                         [&](std::uint32_t agent, std::span<const std::uint8_t> taken, std::span<double> out) {
                           double total = 0.0;
                           for (std::size_t p = 0; p < k; ++p) {
                             out[p] = taken[p] ? 0.0 : weights[agent][p];
                             total += out[p];
                           }
                           return total;
                         });
}

std::vector<double> exact_two_agent_exclusion(std::span<const double> p1, std::span<const double> p2) {
  const std::size_t k = p1.size();
  if (k < 2 || p2.size() != k) throw ContractViolation("two distributions over K >= 2 options are required");
  std::vector<double> joint(k * k, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (i != j) {
        joint[i * k + j] = p1[i] * p2[j];
        z += joint[i * k + j];
      }
  if (!(z > 0.0)) throw InfeasibleError("no pair of distinct options has positive probability");
  for (double& x : joint) x /= z;
  return joint;
}

SelectionRound resolve_conflicts(std::vector<PairIndex> proposals, Rng& rng) {
  if (proposals.empty()) throw ContractViolation("resolve_conflicts needs at least one proposal");
  std::vector<Winner> bids(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) bids[i] = {proposals[i], static_cast<std::uint32_t>(i)};
  std::sort(bids.begin(), bids.end(),
            [](const Winner& a, const Winner& b) { return a.pair != b.pair ? a.pair < b.pair : a.agent < b.agent; });

  SelectionRound round;
  round.proposals = std::move(proposals);
  for (std::size_t begin = 0; begin < bids.size();) {
    std::size_t end = begin + 1;
    while (end < bids.size() && bids[end].pair == bids[begin].pair) ++end;
    const std::size_t n = end - begin;
    round.winners.push_back(n == 1 ? bids[begin] : bids[begin + rng.below(n)]);
    begin = end;
  }
  round.valid_count = round.winners.size();
  return round;
}

void TrialSpec::validate() const {
  grid.validate();
  schedules.validate();
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("gamma must lie in [0, 1)");
  if (n_agents < 1) throw ContractViolation("at least one agent is required");
  if (mode.conflict == ConflictMode::Free && n_agents > grid.num_pairs())
    throw InfeasibleError("conflict-free mode needs n_agents <= " + std::to_string(grid.num_pairs()));
}

TrialStreams TrialStreams::derive(std::uint64_t trial_seed, std::size_t n_agents) {
  TrialStreams s{Rng(derive_seed(trial_seed, "permutation")), Rng(derive_seed(trial_seed, "conflict")), {}, {}};
  s.selection.reserve(n_agents);
  s.environment.reserve(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) {
    s.selection.emplace_back(derive_seed(trial_seed, "selection", i));
    s.environment.emplace_back(derive_seed(trial_seed, "environment", i));
  }
  return s;
}

std::vector<PendingUpdate> compute_updates(const QTable& snapshot, std::span<const Winner> winners,
                                           const CompiledDynamics& dynamics, double alpha, double gamma,
                                           std::span<Rng> environment_rngs) {
  std::vector<PendingUpdate> out;
  out.reserve(winners.size());
  for (const Winner& w : winners) {
    const auto outcome = dynamics.sample(w.pair, environment_rngs[w.agent]);
    const auto u = q_update(snapshot[w.pair], outcome.reward, snapshot.max_at(outcome.next_state), alpha, gamma);
    out.push_back({w, u.q_new, u.delta_q});
  }
  return out;
}

void apply_updates(QTable& q, std::span<AgentBanditState> agents, std::span<const PendingUpdate> updates) {
  for (const auto& u : updates) {
    q[u.winner.pair] = u.q_new;
    record_dq(agents[u.winner.agent], u.winner.pair, u.delta_q);
  }
}

SelectionRound multi_agent_step(QTable& q, std::span<AgentBanditState> agents,
                                const CompiledDynamics& dynamics, const Mode& mode, double gamma,
                                ScheduleValues params, TrialStreams& streams) {
  const std::span<const AgentBanditState> view(agents.data(), agents.size());
  auto proposals = mode.conflict == ConflictMode::Free
                       ? select_conflict_free(view, mode.policy, params.beta, streams.permutation, streams.selection)
                       : select_conflict(view, mode.policy, params.beta, streams.selection);
  SelectionRound round = resolve_conflicts(std::move(proposals), streams.conflict);
  const auto updates = compute_updates(q, round.winners, dynamics, params.alpha, gamma, streams.environment);
  apply_updates(q, agents, updates);
  return round;
}

TrialRecord run_trial(const TrialSpec& spec, const QTable& reference, std::uint64_t trial_seed) {
  spec.validate();
  const std::size_t k = spec.grid.num_pairs();
  if (reference.size() != k) throw ContractViolation("reference table does not match the grid");

  const CompiledDynamics dynamics(spec.grid);
  QTable q(spec.grid.num_states());
  std::vector<AgentBanditState> agents(spec.n_agents, AgentBanditState(k));
  TrialStreams streams = TrialStreams::derive(trial_seed, spec.n_agents);

  const std::uint64_t horizon = spec.schedules.horizon;
  TrialRecord rec;
  rec.loss.reserve(horizon);
  rec.valid_count.reserve(horizon);
  for (std::uint64_t t = 0; t < horizon; ++t) {
    const auto params = schedule_at(spec.schedules, t);
    SelectionRound round = multi_agent_step(q, agents, dynamics, spec.mode, spec.gamma, params, streams);
    rec.loss.push_back(loss(q, reference));
    rec.valid_count.push_back(static_cast<std::uint32_t>(round.valid_count));
    if (t + 1 == horizon) rec.final_proposals = std::move(round.proposals);
  }
  rec.final_q = std::move(q);
  return rec;
}

std::vector<double> run_q_learning(const GridSpec& grid, double gamma, const Schedules& schedules,
                                   double epsilon, const QTable& reference, std::uint64_t seed) {
  grid.validate();
  schedules.validate();
  if (reference.size() != grid.num_pairs()) throw ContractViolation("reference table does not match the grid");
  Rng action_rng(derive_seed(seed, "action"));
  Rng env_rng(derive_seed(seed, "environment"));
  QTable q(grid.num_states());
  State s = grid.state_at(action_rng.below(grid.num_states()));
  std::vector<double> losses;
  losses.reserve(schedules.horizon);
  for (std::uint64_t t = 0; t < schedules.horizon; ++t) {
    const auto params = schedule_at(schedules, t);
    const Action a = epsilon_greedy(q, grid.flat(s), epsilon, action_rng);
    const auto outcome = step(grid, s, a, env_rng);
    const PairIndex p = pair_index(grid, s, a);
    q[p] = q_update(q[p], outcome.reward, q.max_at(grid.flat(outcome.next)), params.alpha, gamma).q_new;
    s = outcome.next;
    losses.push_back(loss(q, reference));
  }
  return losses;
}

}  // namespace dbql
