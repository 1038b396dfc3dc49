#include "dbql/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dbql/errors.hpp"

namespace dbql {

double loss(const QTable& q, const QTable& reference) {
  if (q.size() != reference.size() || q.num_states() != reference.num_states())
    throw ContractViolation("loss: table shapes differ");
  if (q.size() == 0) throw ContractViolation("loss: empty table");
  double sum = 0.0;
  for (PairIndex p = 0; p < q.size(); ++p) sum += std::abs(reference[p] - q[p]);
  return sum / static_cast<double>(q.size());
}

double area_under(std::span<const double> losses) {
  if (losses.empty()) throw ContractViolation("area_under: empty curve");
  double sum = 0.0;
  for (double l : losses) {
    if (!(l >= 0.0)) throw ContractViolation("area_under: negative loss entry");
    sum += l;
  }
  return sum;
}

double valid_rate(const SelectionRound& round, std::size_t n_agents) {
  if (n_agents < 1) throw ContractViolation("valid_rate: at least one agent is required");
  return static_cast<double>(round.valid_count) / static_cast<double>(n_agents);
}

std::uint64_t ChoiceHistogram::total() const {
  return std::accumulate(per_pair.begin(), per_pair.end(), std::uint64_t{0});
}

ChoiceHistogram choice_histogram(std::span<const PairIndex> proposals, const GridSpec& spec) {
  ChoiceHistogram h{std::vector<std::uint32_t>(spec.num_pairs(), 0), std::vector<std::uint32_t>(spec.num_states(), 0)};
  for (PairIndex p : proposals) {
    if (p >= spec.num_pairs()) throw ContractViolation("choice_histogram: pair index out of range");
    ++h.per_pair[p];
    ++h.per_cell[pair_state(p)];
  }
  return h;
}

TrialSeries to_series(const TrialRecord& record, std::size_t n_agents) {
  if (n_agents < 1) throw ContractViolation("to_series: at least one agent is required");
  TrialSeries s;
  s.loss = record.loss;
  s.valid_rate.reserve(record.valid_count.size());
  for (auto v : record.valid_count) s.valid_rate.push_back(static_cast<double>(v) / static_cast<double>(n_agents));
  s.final_proposals = record.final_proposals;
  return s;
}

std::size_t trailing_window(std::size_t steps) {
  return std::max<std::size_t>(1, (steps + 19) / 20);
}

MeanStderr mean_stderr(std::span<const double> values) {
  MeanStderr r;
  if (values.empty()) return r;
  const double n = static_cast<double>(values.size());
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  return r;
}

MetricsSeries aggregate_trials(std::span<const TrialSeries> trials, const GridSpec& spec) {
  if (trials.empty()) throw ContractViolation("aggregate_trials: no trials");
  const std::size_t steps = trials.front().loss.size();
  for (const auto& t : trials)
    if (t.loss.size() != steps || t.valid_rate.size() != steps)
      throw ContractViolation("aggregate_trials: series lengths differ");

  MetricsSeries m;
  m.loss.resize(steps);
  m.loss_stderr.resize(steps);
  m.valid_rate.resize(steps);
  m.valid_rate_stderr.resize(steps);
  std::vector<double> column(trials.size());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < trials.size(); ++i) column[i] = trials[i].loss[t];
    const auto l = mean_stderr(column);
    m.loss[t] = l.mean;
    m.loss_stderr[t] = l.stderr_;
    for (std::size_t i = 0; i < trials.size(); ++i) column[i] = trials[i].valid_rate[t];
    const auto v = mean_stderr(column);
    m.valid_rate[t] = v.mean;
    m.valid_rate_stderr[t] = v.stderr_;
  }

  if (steps > 0) {
    m.s_under = area_under(m.loss);
    for (const auto& t : trials) m.trial_s_under.push_back(area_under(t.loss));
    m.valid_rate_mean = std::accumulate(m.valid_rate.begin(), m.valid_rate.end(), 0.0) / static_cast<double>(steps);
    const std::size_t window = trailing_window(steps);
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const auto& vr = trials[i].valid_rate;
      column[i] = std::accumulate(vr.end() - static_cast<std::ptrdiff_t>(window), vr.end(), 0.0) /
                  static_cast<double>(window);
    }
    const auto tail = mean_stderr(column);
    m.valid_rate_trailing = tail.mean;
    m.valid_rate_trailing_stderr = tail.stderr_;
  }

  m.final_histogram = choice_histogram(trials.front().final_proposals, spec);
  m.final_share.assign(spec.num_pairs(), 0.0);
  for (const auto& t : trials) {
    if (t.final_proposals.empty()) continue;
    const auto h = choice_histogram(t.final_proposals, spec);
    const double n = static_cast<double>(t.final_proposals.size());
    for (PairIndex p = 0; p < spec.num_pairs(); ++p) m.final_share[p] += h.per_pair[p] / n;
  }
  for (double& s : m.final_share) s /= static_cast<double>(trials.size());
  return m;
}

}  // namespace dbql
