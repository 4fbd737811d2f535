#pragma once

#include <functional>
#include <vector>

namespace mfc {

struct TransportResult {
  double cost = 0.0;
  /// Primal minus dual objective; certifies optimality when ~0.
  double dual_gap = 0.0;
  /// flow[i*n_sinks + j] mass moved from source i to sink j.
  std::vector<double> flow;
};

/// Exact balanced transportation solve (successive shortest paths with
/// potentials on the dense bipartite graph).  Supplies and demands must
/// both sum to the same total mass; costs must be nonnegative.
TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const std::function<double(std::size_t, std::size_t)>& cost);

}  // namespace mfc
