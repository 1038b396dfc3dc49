// Hot loop of bandit selection. Built with vectorised math (see
// core/CMakeLists.txt); callers validate finiteness beforehand.
#include <cmath>

#include "dbql/policies.hpp"

namespace dbql {

double softmax_weights(std::span<const double> mean_dq, double beta, std::span<double> out,
                       std::span<const std::uint8_t> excluded) {
  const std::size_t n = mean_dq.size();
  const double* mu = mean_dq.data();
  double* w = out.data();

  if (excluded.empty()) {
    double m = mu[0];
    for (std::size_t i = 1; i < n; ++i) m = mu[i] > m ? mu[i] : m;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = std::exp(beta * (mu[i] - m));
      total += w[i];
    }
    return total;
  }

  const std::uint8_t* ex = excluded.data();
  bool any = false;
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ex[i]) continue;
    if (!any || mu[i] > m) m = mu[i];
    any = true;
  }
  if (!any) {
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.0;
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = beta * (mu[i] - m);
    const double e = std::exp(x < 0.0 ? x : 0.0);
    w[i] = ex[i] ? 0.0 : e;
    total += w[i];
  }
  return total;
}

}  // namespace dbql
