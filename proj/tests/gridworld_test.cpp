#include "dbql/gridworld.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "dbql/errors.hpp"
#include "support/oracles.hpp"

namespace dbql {
namespace {

const State kA{0, 1}, kAPrime{4, 1}, kB{0, 3}, kBPrime{2, 3};

TEST(EnumeratePairs, DefaultGridHasHundredPairsInCanonicalOrder) {
  const GridSpec spec;
  const auto pairs = enumerate_pairs(spec);
  ASSERT_EQ(pairs.size(), 100u);
  EXPECT_EQ(pairs.front().first, (State{0, 0}));
  EXPECT_EQ(pairs.front().second, Action::Up);
  for (std::size_t i = 0; i < pairs.size(); ++i) EXPECT_EQ(pair_index(spec, pairs[i].first, pairs[i].second), i);
}

TEST(EnumeratePairs, SingleCell) {
  GridSpec spec;
  spec.height = spec.width = 1;
  spec.specials.clear();
  EXPECT_EQ(enumerate_pairs(spec).size(), 4u);
}

TEST(GridSpec, ValidateRejectsBadSpecials) {
  GridSpec spec;
  spec.specials.push_back({{5, 0}, {0, 0}, 1.0, 0.5});
  EXPECT_THROW(spec.validate(), ContractViolation);

  spec = GridSpec{};
  spec.specials[0].destination = {0, 7};
  EXPECT_THROW(spec.validate(), ContractViolation);

  spec = GridSpec{};
  spec.specials[0].success_prob = 1.5;
  EXPECT_THROW(spec.validate(), ContractViolation);

  spec = GridSpec{};
  spec.specials[1].source = spec.specials[0].source;
  EXPECT_THROW(spec.validate(), ContractViolation);

  EXPECT_NO_THROW(GridSpec{}.validate());
}

TEST(Step, SpecialCellFollowsItsSingleDraw) {
  const GridSpec spec;
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (Action a : kActions) {
      Rng rng(seed), probe(seed);
      const bool success = probe.uniform() < 0.5;
      const auto out = step(spec, kA, a, rng);
      if (success) {
        EXPECT_EQ(out.reward, 10.0);
        EXPECT_EQ(out.next, kAPrime);
        ++successes;
      } else {
        EXPECT_EQ(out.reward, 0.0);
        EXPECT_EQ(out.next, kA);
      }
      // Exactly one draw consumed.
      EXPECT_EQ(rng(), probe());
    }
  }
  EXPECT_GT(successes, 0);
}

TEST(Step, DeterministicCellsConsumeNoDraws) {
  const GridSpec spec;
  Rng rng(7), probe(7);
  auto out = step(spec, {0, 0}, Action::Up, rng);
  EXPECT_EQ(out.reward, -1.0);
  EXPECT_EQ(out.next, (State{0, 0}));
  out = step(spec, {2, 2}, Action::Right, rng);
  EXPECT_EQ(out.reward, 0.0);
  EXPECT_EQ(out.next, (State{2, 3}));
  EXPECT_EQ(rng(), probe());
}

TEST(Step, OutOfBoundsStateIsAContractViolation) {
  const GridSpec spec;
  Rng rng(1);
  EXPECT_THROW(step(spec, {5, 0}, Action::Up, rng), ContractViolation);
  EXPECT_THROW(step(spec, {0, -1}, Action::Up, rng), ContractViolation);
  EXPECT_THROW(transition_model(spec, {-1, 2}, Action::Left), ContractViolation);
}

TEST(TransitionModel, ListedExamples) {
  const GridSpec spec;
  const auto b = transition_model(spec, kB, Action::Left);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].prob, 0.5);
  EXPECT_EQ(b[0].reward, 5.0);
  EXPECT_EQ(b[0].next, kBPrime);
  EXPECT_EQ(b[1].prob, 0.5);
  EXPECT_EQ(b[1].reward, 0.0);
  EXPECT_EQ(b[1].next, kB);

  const auto corner = transition_model(spec, {0, 0}, Action::Up);
  ASSERT_EQ(corner.size(), 1u);
  EXPECT_EQ(corner[0].prob, 1.0);
  EXPECT_EQ(corner[0].reward, -1.0);
  EXPECT_EQ(corner[0].next, (State{0, 0}));
}

TEST(TransitionModel, NormalisedAndMatchesRules) {
  const GridSpec spec;
  const auto expected = testing::expected_reward_table(spec);
  for (const auto& [s, a] : enumerate_pairs(spec)) {
    double total = 0.0, mean_reward = 0.0;
    for (const auto& t : transition_model(spec, s, a)) {
      EXPECT_GT(t.prob, 0.0);
      EXPECT_LE(t.prob, 1.0);
      EXPECT_TRUE(spec.contains(t.next));
      total += t.prob;
      mean_reward += t.prob * t.reward;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(mean_reward, expected[pair_index(spec, s, a)]);
  }
}

TEST(TransitionModel, DegenerateProbabilitiesDropEmptyBranches) {
  GridSpec spec;
  spec.specials[0].success_prob = 1.0;
  spec.specials[1].success_prob = 0.0;
  const auto a = transition_model(spec, kA, Action::Down);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].next, kAPrime);
  const auto b = transition_model(spec, kB, Action::Down);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].next, kB);
  EXPECT_EQ(b[0].reward, 0.0);
}

// Empirical outcome frequencies against the exact model, and the reward
// support, for every pair.
TEST(Step, EmpiricalFrequenciesMatchTransitionModel) {
  const GridSpec spec;
  constexpr std::uint64_t kSamples = 100000;
  Rng rng(20240611);
  for (const auto& [s, a] : enumerate_pairs(spec)) {
    const auto model = transition_model(spec, s, a);
    std::map<std::pair<double, std::size_t>, std::uint64_t> counts;
    for (std::uint64_t i = 0; i < kSamples; ++i) {
      const auto out = step(spec, s, a, rng);
      ASSERT_TRUE(spec.contains(out.next));
      ++counts[{out.reward, spec.flat(out.next)}];
    }
    std::uint64_t matched = 0;
    for (const auto& t : model) {
      const auto hits = counts[{t.reward, spec.flat(t.next)}];
      matched += hits;
      EXPECT_TRUE(testing::within_binomial(hits, kSamples, t.prob)) << "pair " << pair_index(spec, s, a);
    }
    EXPECT_EQ(matched, kSamples) << "outcome outside the model's support";
  }
}

TEST(Step, ReplayIsDeterministic) {
  const GridSpec spec;
  Rng r1(99), r2(99);
  for (int i = 0; i < 1000; ++i) {
    const State s = spec.state_at(static_cast<std::size_t>(i) % spec.num_states());
    const Action a = kActions[static_cast<std::size_t>(i) % 4];
    const auto x = step(spec, s, a, r1);
    const auto y = step(spec, s, a, r2);
    EXPECT_EQ(x.reward, y.reward);
    EXPECT_EQ(x.next, y.next);
  }
}

TEST(CompiledDynamics, DrawForDrawEqualToStep) {
  const GridSpec spec;
  const CompiledDynamics dyn(spec);
  Rng r1(5), r2(5);
  for (int rep = 0; rep < 50; ++rep) {
    for (const auto& [s, a] : enumerate_pairs(spec)) {
      const auto x = step(spec, s, a, r1);
      const auto y = dyn.sample(pair_index(spec, s, a), r2);
      EXPECT_EQ(x.reward, y.reward);
      EXPECT_EQ(spec.flat(x.next), y.next_state);
    }
  }
}

TEST(Action, NamesRoundTrip) {
  for (Action a : kActions) EXPECT_EQ(action_from_string(to_string(a)), a);
  EXPECT_THROW(action_from_string("north"), ContractViolation);
}

}  // namespace
}  // namespace dbql
