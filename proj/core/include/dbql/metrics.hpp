#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dbql/gridworld.hpp"
#include "dbql/multiagent.hpp"
#include "dbql/planner.hpp"

namespace dbql {

/// Mean absolute difference over all state-action pairs.
double loss(const QTable& q, const QTable& reference);
inline double loss(const QTable& q, const OptimalQ& reference) { return loss(q, reference.values); }

/// Area under a learning curve: the plain sum of its entries.
double area_under(std::span<const double> losses);

/// Fraction of agents whose proposal was applied.
double valid_rate(const SelectionRound& round, std::size_t n_agents);

struct ChoiceHistogram {
  std::vector<std::uint32_t> per_pair;  ///< indexed by PairIndex
  std::vector<std::uint32_t> per_cell;  ///< indexed by flat state, summed over actions

  std::uint64_t total() const;
};

ChoiceHistogram choice_histogram(std::span<const PairIndex> proposals, const GridSpec& spec);

/// What a single trial contributes to the aggregate.
struct TrialSeries {
  std::vector<double> loss;
  std::vector<double> valid_rate;
  std::vector<PairIndex> final_proposals;
};

TrialSeries to_series(const TrialRecord& record, std::size_t n_agents);

/// Trial-averaged curves with their pointwise standard errors.
struct MetricsSeries {
  std::vector<double> loss;
  std::vector<double> loss_stderr;
  std::vector<double> valid_rate;
  std::vector<double> valid_rate_stderr;

  double s_under = 0.0;               ///< area under the averaged loss curve
  std::vector<double> trial_s_under;  ///< area under each trial's curve

  double valid_rate_mean = 0.0;      ///< averaged series, mean over all steps
  double valid_rate_trailing = 0.0;  ///< mean over the last 5% of steps
  double valid_rate_trailing_stderr = 0.0;

  ChoiceHistogram final_histogram;  ///< final-step proposals of the first trial
  std::vector<double> final_share;  ///< per pair, fraction of agents, averaged over trials
};

/// Number of trailing steps used for valid_rate_trailing: 5% of the
/// horizon, at least one.
std::size_t trailing_window(std::size_t steps);

/// Pointwise mean and standard error across trials. All trials must have
/// equal-length series. `spec` sizes the histograms.
MetricsSeries aggregate_trials(std::span<const TrialSeries> trials, const GridSpec& spec);

/// Sample mean and standard error of the mean (zero for fewer than two values).
struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};
MeanStderr mean_stderr(std::span<const double> values);

}  // namespace dbql
