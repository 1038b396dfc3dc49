#pragma once

#include <vector>

#include "dbql/gridworld.hpp"

namespace dbql {

/// Optimal action values of a grid world and the certificate that they
/// are converged.
struct OptimalQ {
  QTable values;
  double gamma = 0.0;
  double residual = 0.0;  ///< max-norm Bellman optimality residual of `values`
};

/// Synchronous (Jacobi) value iteration on the exact transition model,
/// starting from all zeros. Stops as soon as the Bellman residual of the
/// current table is at most `tol`.
///
/// Throws DivergenceError if gamma >= 1 and ContractViolation if gamma < 0
/// or tol <= 0.
OptimalQ value_iteration(const GridSpec& spec, double gamma, double tol = 1e-10);

/// Same as above but starting from `init`.
OptimalQ value_iteration(const GridSpec& spec, double gamma, double tol, QTable init);

/// One synchronous Bellman optimality backup of `q`.
QTable bellman_backup(const GridSpec& spec, const QTable& q, double gamma);

/// max over pairs of |q(s,a) - sum_T prob * (reward + gamma * max_a' q(next, a'))|.
double bellman_residual(const GridSpec& spec, const QTable& q, double gamma);

/// argmax_a q(s, a) for every state; ties go to the earliest action in
/// canonical order (Up, Down, Left, Right).
std::vector<Action> greedy_policy(const QTable& q);

}  // namespace dbql
