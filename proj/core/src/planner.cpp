#include "dbql/planner.hpp"

#include <algorithm>
#include <cmath>

#include "dbql/errors.hpp"

namespace dbql {

namespace {

struct FlatTransition {
  double prob;
  double reward;
  std::size_t next;
};

std::vector<std::vector<FlatTransition>> flatten_model(const GridSpec& spec) {
  std::vector<std::vector<FlatTransition>> model;
  model.reserve(spec.num_pairs());
  for (const auto& [s, a] : enumerate_pairs(spec)) {
    std::vector<FlatTransition> ts;
    for (const auto& t : transition_model(spec, s, a)) ts.push_back({t.prob, t.reward, spec.flat(t.next)});
    model.push_back(std::move(ts));
  }
  return model;
}

void backup_into(const std::vector<std::vector<FlatTransition>>& model, const QTable& q, double gamma,
                 QTable& out) {
  for (PairIndex p = 0; p < model.size(); ++p) {
    double v = 0.0;
    for (const auto& t : model[p]) v += t.prob * (t.reward + gamma * q.max_at(t.next));
    out[p] = v;
  }
}

double max_abs_diff(const QTable& a, const QTable& b) {
  double d = 0.0;
  for (PairIndex p = 0; p < a.size(); ++p) d = std::max(d, std::abs(a[p] - b[p]));
  return d;
}

void check_gamma(double gamma) {
  if (!(gamma < 1.0)) throw DivergenceError("value iteration requires gamma < 1");
  if (!(gamma >= 0.0)) throw ContractViolation("gamma must be non-negative");
}

void check_shape(const GridSpec& spec, const QTable& q) {
  if (q.num_states() != spec.num_states() || q.size() != spec.num_pairs())
    throw ContractViolation("table does not cover the grid's state-action pairs");
}

}  // namespace

OptimalQ value_iteration(const GridSpec& spec, double gamma, double tol) {
  return value_iteration(spec, gamma, tol, QTable(spec.num_states()));
}

OptimalQ value_iteration(const GridSpec& spec, double gamma, double tol, QTable init) {
  check_gamma(gamma);
  if (!(tol > 0.0)) throw ContractViolation("tol must be positive");
  spec.validate();
  check_shape(spec, init);

  const auto model = flatten_model(spec);
  QTable current = std::move(init);
  QTable next(spec.num_states());
  for (;;) {
    backup_into(model, current, gamma, next);
    // ||T q - q|| is exactly the residual of the current table.
    const double residual = max_abs_diff(next, current);
    if (residual <= tol) return {std::move(current), gamma, residual};
    std::swap(current, next);
  }
}

QTable bellman_backup(const GridSpec& spec, const QTable& q, double gamma) {
  check_shape(spec, q);
  QTable out(spec.num_states());
  backup_into(flatten_model(spec), q, gamma, out);
  return out;
}

double bellman_residual(const GridSpec& spec, const QTable& q, double gamma) {
  return max_abs_diff(bellman_backup(spec, q, gamma), q);
}

std::vector<Action> greedy_policy(const QTable& q) {
  std::vector<Action> policy(q.num_states(), Action::Up);
  for (std::size_t s = 0; s < q.num_states(); ++s) {
    double best = q.at(s, Action::Up);
    for (Action a : kActions) {
      if (q.at(s, a) > best) {
        best = q.at(s, a);
        policy[s] = a;
      }
    }
  }
  return policy;
}

}  // namespace dbql
