#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dbql/gridworld.hpp"
#include "dbql/policies.hpp"
#include "dbql/rng.hpp"

namespace dbql {

enum class SelectionPolicy : std::uint8_t { UniformRandom, Bandit };
enum class ConflictMode : std::uint8_t { Allowed, Free };

struct Mode {
  SelectionPolicy policy = SelectionPolicy::Bandit;
  ConflictMode conflict = ConflictMode::Free;
  friend bool operator==(const Mode&, const Mode&) = default;
};

std::string_view to_string(SelectionPolicy p) noexcept;
std::string_view to_string(ConflictMode c) noexcept;
/// "uniform random/conflict", "bandit/conflict-free", ...
std::string label(const Mode& m);

/// Every policy x conflict combination, in the order uniform/conflict,
/// bandit/conflict, uniform/conflict-free, bandit/conflict-free.
inline constexpr std::array<Mode, 4> kAllModes = {
    Mode{SelectionPolicy::UniformRandom, ConflictMode::Allowed},
    Mode{SelectionPolicy::Bandit, ConflictMode::Allowed},
    Mode{SelectionPolicy::UniformRandom, ConflictMode::Free},
    Mode{SelectionPolicy::Bandit, ConflictMode::Free},
};

struct Winner {
  PairIndex pair;
  std::uint32_t agent;
  friend bool operator==(const Winner&, const Winner&) = default;
};

/// Outcome of one joint selection: what each agent proposed and which
/// proposals survive. Winners are sorted by pair and pairwise distinct.
struct SelectionRound {
  std::vector<PairIndex> proposals;  ///< indexed by agent
  std::vector<Winner> winners;
  std::size_t valid_count = 0;
};

/// Independent draws: uniform over all pairs, or softmax over each
/// agent's own mean-dQ table. Duplicates are allowed. One stream per agent.
std::vector<PairIndex> select_conflict(std::span<const AgentBanditState> agents, SelectionPolicy policy,
                                       double beta, std::span<Rng> selection_rngs);

/// Pairwise-distinct joint draw. A uniform random permutation of the
/// agents is drawn from `permutation_rng`; each agent in that order then
/// samples from its own distribution restricted to the pairs not yet
/// taken, renormalised, falling back to uniform over the remaining pairs
/// when the restriction has no mass. If `order` is non-null it receives
/// the permutation. Throws InfeasibleError when agents outnumber pairs.
std::vector<PairIndex> select_conflict_free(std::span<const AgentBanditState> agents,
                                            SelectionPolicy policy, double beta, Rng& permutation_rng,
                                            std::span<Rng> selection_rngs,
                                            std::vector<std::uint32_t>* order = nullptr);

/// The same sequential scheme for arbitrary per-agent weight vectors
/// (non-negative, not necessarily normalised, all of one length).
std::vector<PairIndex> select_distinct_weighted(std::span<const std::vector<double>> weights,
                                                Rng& permutation_rng, std::span<Rng> selection_rngs,
                                                std::vector<std::uint32_t>* order = nullptr);

/// Joint law of two independent choices conditioned on being different:
/// P(i, j) = p1(i) p2(j) / sum_{i' != j'} p1(i') p2(j'), P(i, i) = 0.
/// Returned row-major as a K x K matrix. Throws InfeasibleError when no
/// distinct outcome has mass.
std::vector<double> exact_two_agent_exclusion(std::span<const double> p1, std::span<const double> p2);

/// For each distinct proposed pair, picks one proposer uniformly at
/// random. One draw from `rng` per pair with two or more proposers.
SelectionRound resolve_conflicts(std::vector<PairIndex> proposals, Rng& rng);

/// Parameters of a single simulated run.
struct TrialSpec {
  GridSpec grid;
  double gamma = 0.9;
  Schedules schedules;
  std::uint32_t n_agents = 10;
  Mode mode;

  /// Throws ContractViolation / InfeasibleError on invalid values.
  void validate() const;
  friend bool operator==(const TrialSpec&, const TrialSpec&) = default;
};

/// Random streams of one trial, split by purpose so that their draws
/// never interleave.
struct TrialStreams {
  Rng permutation;
  Rng conflict;
  std::vector<Rng> selection;    ///< per agent
  std::vector<Rng> environment;  ///< per agent

  static TrialStreams derive(std::uint64_t trial_seed, std::size_t n_agents);
};

/// Update computed by a winning agent against the step-start table.
struct PendingUpdate {
  Winner winner;
  double q_new;
  double delta_q;
};

/// Evaluates every winner's environment step and Q update reading only
/// `snapshot`.
std::vector<PendingUpdate> compute_updates(const QTable& snapshot, std::span<const Winner> winners,
                                           const CompiledDynamics& dynamics, double alpha, double gamma,
                                           std::span<Rng> environment_rngs);

/// Writes the updates into the table and each winner's dQ record. The
/// result does not depend on the order of `updates`.
void apply_updates(QTable& q, std::span<AgentBanditState> agents, std::span<const PendingUpdate> updates);

/// One synchronous step: propose, resolve, compute against a snapshot,
/// then apply. Losers leave both the table and their records untouched.
SelectionRound multi_agent_step(QTable& q, std::span<AgentBanditState> agents,
                                const CompiledDynamics& dynamics, const Mode& mode, double gamma,
                                ScheduleValues params, TrialStreams& streams);

/// Per-step time series of one trial.
struct TrialRecord {
  std::vector<double> loss;                 ///< L_1 .. L_T, measured after each step
  std::vector<std::uint32_t> valid_count;   ///< winners per step
  std::vector<PairIndex> final_proposals;   ///< proposals of the last step
  QTable final_q;
};

/// Runs `schedules.horizon` steps from an all-zero table. `reference` is
/// the optimal table the loss is measured against. Deterministic in
/// (spec, trial_seed).
TrialRecord run_trial(const TrialSpec& spec, const QTable& reference, std::uint64_t trial_seed);

/// Single-agent on-trajectory Q-learning with epsilon-greedy actions,
/// for comparison with the discontinuous learners. Starts in a uniformly
/// drawn state; returns the loss after each step.
std::vector<double> run_q_learning(const GridSpec& grid, double gamma, const Schedules& schedules,
                                   double epsilon, const QTable& reference, std::uint64_t seed);

}  // namespace dbql
