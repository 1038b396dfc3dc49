#include "dbql/policies.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "dbql/errors.hpp"
#include "support/oracles.hpp"

namespace dbql {
namespace {

void set(QTable& q, std::size_t s, Action a, double v) { q[s * kNumActions + static_cast<std::size_t>(a)] = v; }

TEST(QUpdate, WorkedExamples) {
  auto u = q_update(0.0, 10.0, 0.0, 0.5, 0.9);
  EXPECT_EQ(u.q_new, 5.0);
  EXPECT_EQ(u.delta_q, 5.0);

  u = q_update(2.0, 0.0, 0.0, 0.25, 0.9);
  EXPECT_EQ(u.q_new, 1.5);
  EXPECT_EQ(u.delta_q, 0.5);

  u = q_update(1.0, 1.0, 10.0, 0.1, 0.5);  // target 6
  EXPECT_DOUBLE_EQ(u.q_new, 1.5);
  EXPECT_DOUBLE_EQ(u.delta_q, 0.5);
}

TEST(QUpdate, ZeroStepSizeLeavesValueUnchanged) {
  const auto u = q_update(3.25, 10.0, 7.0, 0.0, 0.9);
  EXPECT_EQ(u.q_new, 3.25);
  EXPECT_EQ(u.delta_q, 0.0);
}

TEST(QUpdate, FullStepJumpsToTarget) {
  const auto u = q_update(-4.0, 2.0, 3.0, 1.0, 0.5);
  EXPECT_EQ(u.q_new, 3.5);
  EXPECT_EQ(u.delta_q, 7.5);
}

TEST(Schedules, Endpoints) {
  const Schedules s;
  auto v = schedule_at(s, 0);
  EXPECT_EQ(v.alpha, 0.035);
  EXPECT_EQ(v.beta, 1.0);
  v = schedule_at(s, s.horizon);
  EXPECT_EQ(v.alpha, 0.0);
  EXPECT_EQ(v.beta, 5.0);
  v = schedule_at(s, s.horizon / 2);
  EXPECT_DOUBLE_EQ(v.alpha, 0.0175);
  EXPECT_DOUBLE_EQ(v.beta, 3.0);
}

TEST(Schedules, MonotoneOverTheHorizon) {
  const Schedules s;
  auto prev = schedule_at(s, 0);
  for (std::uint64_t t = 1; t <= s.horizon; ++t) {
    const auto v = schedule_at(s, t);
    EXPECT_LE(v.alpha, prev.alpha);
    EXPECT_GE(v.beta, prev.beta);
    EXPECT_GE(v.alpha, 0.0);
    prev = v;
  }
}

TEST(Schedules, BeyondHorizonThrows) {
  const Schedules s;
  EXPECT_THROW(schedule_at(s, s.horizon + 1), ContractViolation);
}

TEST(Schedules, ValidateRejectsOutOfRange) {
  Schedules s;
  s.alpha0 = 1.5;
  EXPECT_THROW(s.validate(), ContractViolation);
  s = Schedules{};
  s.beta_final = -1.0;
  EXPECT_THROW(s.validate(), ContractViolation);
  s = Schedules{};
  s.alpha_final = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(s.validate(), ContractViolation);
  EXPECT_NO_THROW(Schedules{}.validate());
}

TEST(RecordDq, RunningMeanEqualsBatchMean) {
  AgentBanditState st(8);
  Rng rng(11);
  std::vector<double> seen;
  for (int i = 0; i < 1000; ++i) {
    const double dq = 3.0 * rng.uniform();
    seen.push_back(dq);
    record_dq(st, 5, dq);
  }
  const double mean = std::accumulate(seen.begin(), seen.end(), 0.0) / static_cast<double>(seen.size());
  EXPECT_NEAR(st.mean_dq[5], mean, 1e-12);
  EXPECT_EQ(st.count[5], 1000u);
  for (std::size_t p = 0; p < 8; ++p)
    if (p != 5) {
      EXPECT_EQ(st.mean_dq[p], 0.0);
      EXPECT_EQ(st.count[p], 0u);
    }
}

TEST(RecordDq, RejectsNegativeAndOutOfRange) {
  AgentBanditState st(4);
  EXPECT_THROW(record_dq(st, 0, -0.1), ContractViolation);
  EXPECT_THROW(record_dq(st, 4, 0.1), ContractViolation);
  EXPECT_THROW(record_dq(st, 0, std::numeric_limits<double>::quiet_NaN()), ContractViolation);
}

TEST(Softmax, NormalisedAndMatchesDirectFormula) {
  const std::vector<double> mu = {0.0, 0.5, 1.0, 2.0, 0.25};
  const double beta = 1.7;
  const auto p = softmax_probs(mu, beta);
  double z = 0.0;
  for (double m : mu) z += std::exp(beta * m);
  for (std::size_t i = 0; i < mu.size(); ++i) EXPECT_NEAR(p[i], std::exp(beta * mu[i]) / z, 1e-15);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-14);
}

TEST(Softmax, BetaZeroIsUniform) {
  const std::vector<double> mu = {3.0, -1.0, 100.0, 0.0};
  for (double x : softmax_probs(mu, 0.0)) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Softmax, ShiftInvariantAndOverflowSafe) {
  const std::vector<double> mu = {1.0, 2.0, 3.0};
  std::vector<double> shifted = mu;
  for (double& x : shifted) x += 1000.0;
  const auto a = softmax_probs(mu, 5.0);
  const auto b = softmax_probs(shifted, 5.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::isfinite(b[i]));
    EXPECT_NEAR(a[i], b[i], 1e-14);
  }
}

TEST(Softmax, RejectsBadInput) {
  const std::vector<double> mu = {0.0, std::numeric_limits<double>::infinity()};
  EXPECT_THROW(softmax_probs(mu, 1.0), ContractViolation);
  const std::vector<double> ok = {0.0, 1.0};
  EXPECT_THROW(softmax_probs(ok, -1.0), ContractViolation);
  EXPECT_THROW(softmax_probs({}, 1.0), ContractViolation);
}

TEST(SoftmaxWeights, AgreeWithProbabilities) {
  std::vector<double> mu(100);
  Rng rng(4);
  for (double& x : mu) x = rng.uniform();
  std::vector<double> w(mu.size());
  const double total = softmax_weights(mu, 3.5, w);
  const auto p = softmax_probs(mu, 3.5);
  for (std::size_t i = 0; i < mu.size(); ++i) EXPECT_NEAR(w[i] / total, p[i], 1e-12);
}

TEST(SoftmaxWeights, ExcludedEntriesGetNoMass) {
  const std::vector<double> mu = {5.0, 1.0, 0.0, 1.0};
  const std::vector<std::uint8_t> excluded = {1, 0, 1, 0};
  std::vector<double> w(4);
  const double total = softmax_weights(mu, 2.0, w, excluded);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_EQ(w[2], 0.0);
  EXPECT_GT(w[1], 0.0);
  EXPECT_NEAR(w[1] / total, 0.5, 1e-14);

  const std::vector<std::uint8_t> all(4, 1);
  EXPECT_EQ(softmax_weights(mu, 2.0, w, all), 0.0);
}

TEST(SampleWeighted, FrequenciesPassChiSquared) {
  const std::vector<double> w = {1.0, 0.0, 3.0, 0.5, 2.5};
  const double total = 7.0;
  std::vector<double> p;
  for (double x : w) p.push_back(x / total);
  // 20 replicates: a correct sampler rejects at the 1% level in four or
  // more of them with probability ~4e-5.
  int rejected = 0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    std::vector<std::uint64_t> counts(w.size(), 0);
    Rng rng(derive_seed(17, "chi2", rep));
    for (int i = 0; i < 50000; ++i) ++counts[sample_weighted(w, total, rng)];
    EXPECT_EQ(counts[1], 0u);
    rejected += testing::chi_squared_p_value(counts, p) <= 0.01;
  }
  EXPECT_LE(rejected, 3);
}

TEST(SampleWeighted, SingleDrawPerSample) {
  const std::vector<double> w = {1.0, 1.0};
  Rng a(8), b(8);
  sample_weighted(w, 2.0, a);
  b.uniform();
  EXPECT_EQ(a(), b());
}

TEST(EpsilonGreedy, GreedyWhenEpsilonZero) {
  QTable q(2);
  set(q, 0, Action::Left, 1.0);
  set(q, 1, Action::Down, -0.5);
  set(q, 1, Action::Up, -1.0);
  set(q, 1, Action::Left, -1.0);
  set(q, 1, Action::Right, -1.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(epsilon_greedy(q, 0, 0.0, rng), Action::Left);
    EXPECT_EQ(epsilon_greedy(q, 1, 0.0, rng), Action::Down);
  }
}

TEST(EpsilonGreedy, TiesBrokenUniformly) {
  QTable q(1);
  set(q, 0, Action::Up, 2.0);
  set(q, 0, Action::Right, 2.0);
  Rng rng(2);
  std::vector<std::uint64_t> counts(4, 0);
  for (int i = 0; i < 40000; ++i) ++counts[static_cast<std::size_t>(epsilon_greedy(q, 0, 0.0, rng))];
  EXPECT_EQ(counts[1] + counts[2], 0u);
  EXPECT_TRUE(testing::within_binomial(counts[0], 40000, 0.5));
}

TEST(EpsilonGreedy, ExplorationRate) {
  QTable q(1);
  set(q, 0, Action::Down, 1.0);
  Rng rng(3);
  const double eps = 0.2;
  std::vector<std::uint64_t> counts(4, 0);
  for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(epsilon_greedy(q, 0, eps, rng))];
  const std::vector<double> p = {eps / 4, 1 - eps + eps / 4, eps / 4, eps / 4};
  EXPECT_GT(testing::chi_squared_p_value(counts, p), 0.01);
  EXPECT_THROW(epsilon_greedy(q, 0, 1.5, rng), ContractViolation);
  EXPECT_THROW(epsilon_greedy(q, 1, 0.1, rng), ContractViolation);
}

}  // namespace
}  // namespace dbql
