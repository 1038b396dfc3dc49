#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dbql/rng.hpp"

namespace dbql {

struct State {
  int row = 0;
  int col = 0;
  friend bool operator==(State, State) = default;
};

/// The four moves, in canonical order.
enum class Action : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr std::size_t kNumActions = 4;
inline constexpr std::array<Action, kNumActions> kActions = {Action::Up, Action::Down, Action::Left,
                                                             Action::Right};

std::string_view to_string(Action a) noexcept;
Action action_from_string(std::string_view name);

/// A cell whose every action yields `reward` and moves to `destination`
/// with probability `success_prob`, and otherwise yields 0 and stays put.
struct SpecialCell {
  State source;
  State destination;
  double reward = 0.0;
  double success_prob = 1.0;
  friend bool operator==(const SpecialCell&, const SpecialCell&) = default;
};

struct GridSpec {
  int height = 5;
  int width = 5;
  std::vector<SpecialCell> specials = default_specials();
  double wall_penalty = -1.0;
  double step_reward = 0.0;

  /// A(0,1) -> A'(4,1) paying +10 and B(0,3) -> B'(2,3) paying +5, each
  /// succeeding half of the time.
  static std::vector<SpecialCell> default_specials();

  std::size_t num_states() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::size_t num_pairs() const noexcept { return num_states() * kNumActions; }
  bool contains(State s) const noexcept {
    return s.row >= 0 && s.row < height && s.col >= 0 && s.col < width;
  }

  std::size_t flat(State s) const noexcept { return static_cast<std::size_t>(s.row) * width + s.col; }
  State state_at(std::size_t flat_index) const noexcept {
    return {static_cast<int>(flat_index / width), static_cast<int>(flat_index % width)};
  }

  /// Throws ContractViolation if a special cell is out of bounds, has a
  /// probability outside [0,1], or shares its source with another.
  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Flat index of a state-action pair: flat(state) * 4 + action.
using PairIndex = std::size_t;

inline PairIndex pair_index(const GridSpec& spec, State s, Action a) noexcept {
  return spec.flat(s) * kNumActions + static_cast<std::size_t>(a);
}
inline std::size_t pair_state(PairIndex p) noexcept { return p / kNumActions; }
inline Action pair_action(PairIndex p) noexcept { return static_cast<Action>(p % kNumActions); }

/// All (state, action) pairs in (flat state index, action) order.
std::vector<std::pair<State, Action>> enumerate_pairs(const GridSpec& spec);

struct Transition {
  double prob = 0.0;
  double reward = 0.0;
  State next;
};

struct StepOutcome {
  double reward = 0.0;
  State next;
};

/// Samples one environment transition. Consumes exactly one uniform draw
/// from `rng` when `s` is a special source and none otherwise.
StepOutcome step(const GridSpec& spec, State s, Action a, Rng& rng);

/// Exact outcome distribution of step(). Zero-probability branches are
/// omitted, so every listed prob is in (0, 1].
std::vector<Transition> transition_model(const GridSpec& spec, State s, Action a);

/// Dense (state, action) -> value table indexed by PairIndex.
class QTable {
 public:
  QTable() = default;
  explicit QTable(std::size_t num_states, double init = 0.0)
      : num_states_(num_states), values_(num_states * kNumActions, init) {}

  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator[](PairIndex p) noexcept { return values_[p]; }
  double operator[](PairIndex p) const noexcept { return values_[p]; }
  double at(std::size_t state, Action a) const noexcept {
    return values_[state * kNumActions + static_cast<std::size_t>(a)];
  }

  double max_at(std::size_t state) const noexcept {
    const double* row = values_.data() + state * kNumActions;
    double m = row[0];
    for (std::size_t i = 1; i < kNumActions; ++i) m = row[i] > m ? row[i] : m;
    return m;
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t num_states_ = 0;
  std::vector<double> values_;
};

/// Per-pair dynamics flattened for the simulation loop. Equivalent to
/// step()/transition_model() but with no per-call validation.
class CompiledDynamics {
 public:
  struct StepResult {
    double reward;
    std::uint32_t next_state;
  };

  explicit CompiledDynamics(const GridSpec& spec);

  std::size_t num_pairs() const noexcept { return pairs_.size(); }

  /// Same law and draw budget as step().
  StepResult sample(PairIndex p, Rng& rng) const noexcept;

 private:
  struct Entry {
    bool stochastic = false;
    double success_prob = 1.0;
    double reward = 0.0;       // reward on success (or the only reward)
    std::uint32_t next = 0;    // next flat state on success (or the only one)
    std::uint32_t stay = 0;    // flat source state, used on failure
  };
  std::vector<Entry> pairs_;
};

}  // namespace dbql
