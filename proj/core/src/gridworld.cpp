#include "dbql/gridworld.hpp"

#include <algorithm>
#include <string>

#include "dbql/errors.hpp"

namespace dbql {

namespace {

constexpr std::array<std::string_view, kNumActions> kActionNames = {"up", "down", "left", "right"};

const SpecialCell* find_special(const GridSpec& spec, State s) noexcept {
  for (const auto& sc : spec.specials)
    if (sc.source == s) return &sc;
  return nullptr;
}

// Neighbor in direction a; {false, s} when the move leaves the grid.
std::pair<bool, State> move(const GridSpec& spec, State s, Action a) noexcept {
  State n = s;
  switch (a) {
    case Action::Up: --n.row; break;
    case Action::Down: ++n.row; break;
    case Action::Left: --n.col; break;
    case Action::Right: ++n.col; break;
  }
  if (!spec.contains(n)) return {false, s};
  return {true, n};
}

void require_in_bounds(const GridSpec& spec, State s) {
  if (!spec.contains(s))
    throw ContractViolation("state (" + std::to_string(s.row) + "," + std::to_string(s.col) +
                            ") is outside the " + std::to_string(spec.height) + "x" +
                            std::to_string(spec.width) + " grid");
}

}  // namespace

std::string_view to_string(Action a) noexcept { return kActionNames[static_cast<std::size_t>(a)]; }

Action action_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kNumActions; ++i)
    if (kActionNames[i] == name) return kActions[i];
  throw ContractViolation("unknown action '" + std::string(name) + "'");
}

std::vector<SpecialCell> GridSpec::default_specials() {
  return {
      SpecialCell{{0, 1}, {4, 1}, 10.0, 0.5},
      SpecialCell{{0, 3}, {2, 3}, 5.0, 0.5},
  };
}

void GridSpec::validate() const {
  if (height < 1 || width < 1) throw ContractViolation("grid dimensions must be positive");
  for (std::size_t i = 0; i < specials.size(); ++i) {
    const auto& sc = specials[i];
    if (!contains(sc.source)) throw ContractViolation("special cell source is out of bounds");
    if (!contains(sc.destination))
      throw ContractViolation("special cell destination is out of bounds");
    if (!(sc.success_prob >= 0.0 && sc.success_prob <= 1.0))
      throw ContractViolation("special cell success_prob must lie in [0, 1]");
    for (std::size_t j = 0; j < i; ++j)
      if (specials[j].source == sc.source)
        throw ContractViolation("special cell sources must be pairwise distinct");
  }
}

std::vector<std::pair<State, Action>> enumerate_pairs(const GridSpec& spec) {
  std::vector<std::pair<State, Action>> out;
  out.reserve(spec.num_pairs());
  for (std::size_t f = 0; f < spec.num_states(); ++f)
    for (Action a : kActions) out.emplace_back(spec.state_at(f), a);
  return out;
}

StepOutcome step(const GridSpec& spec, State s, Action a, Rng& rng) {
  require_in_bounds(spec, s);
  if (const SpecialCell* sc = find_special(spec, s)) {
    if (rng.uniform() < sc->success_prob) return {sc->reward, sc->destination};
    return {0.0, s};
  }
  const auto [moved, next] = move(spec, s, a);
  if (!moved) return {spec.wall_penalty, s};
  return {spec.step_reward, next};
}

std::vector<Transition> transition_model(const GridSpec& spec, State s, Action a) {
  require_in_bounds(spec, s);
  if (const SpecialCell* sc = find_special(spec, s)) {
    std::vector<Transition> out;
    if (sc->success_prob > 0.0) out.push_back({sc->success_prob, sc->reward, sc->destination});
    if (sc->success_prob < 1.0) out.push_back({1.0 - sc->success_prob, 0.0, s});
    return out;
  }
  const auto [moved, next] = move(spec, s, a);
  if (!moved) return {{1.0, spec.wall_penalty, s}};
  return {{1.0, spec.step_reward, next}};
}

CompiledDynamics::CompiledDynamics(const GridSpec& spec) {
  spec.validate();
  pairs_.reserve(spec.num_pairs());
  for (const auto& [s, a] : enumerate_pairs(spec)) {
    Entry e;
    e.stay = static_cast<std::uint32_t>(spec.flat(s));
    if (const SpecialCell* sc = find_special(spec, s)) {
      e.stochastic = true;
      e.success_prob = sc->success_prob;
      e.reward = sc->reward;
      e.next = static_cast<std::uint32_t>(spec.flat(sc->destination));
    } else {
      const auto [moved, next] = move(spec, s, a);
      e.reward = moved ? spec.step_reward : spec.wall_penalty;
      e.next = static_cast<std::uint32_t>(spec.flat(next));
    }
    pairs_.push_back(e);
  }
}

CompiledDynamics::StepResult CompiledDynamics::sample(PairIndex p, Rng& rng) const noexcept {
  const Entry& e = pairs_[p];
  if (e.stochastic) {
    if (rng.uniform() < e.success_prob) return {e.reward, e.next};
    return {0.0, e.stay};
  }
  return {e.reward, e.next};
}

}  // namespace dbql
