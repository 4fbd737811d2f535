#include "mfc/cost.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mfc {

CostBreakdown path_cost(const Path& path, const RelaxedControl& mu, const FlowMeasure& m,
                        const ProblemSpec& spec) {
  if (path.steps() != mu.steps() || mu.steps() != m.steps() || path.horizon != m.horizon)
    throw std::invalid_argument("path_cost: grid mismatch");
  const int n = path.steps();
  const double dt = path.dt();
  CostBreakdown out;
  for (int k = 0; k < n; ++k) {
    const auto& row = mu.weights[k];
    const AtomicMeasure& nu = m.at_step(k);
    double stage = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] == 0.0) continue;
      const double l = spec.L(path.positions[k], mu.atoms->atoms[j], nu);
      if (!std::isfinite(l))
        throw std::runtime_error("path_cost: non-finite Lagrangian at step " + std::to_string(k) +
                                 ", atom " + std::to_string(j));
      stage += row[j] * l;
    }
    out.running += dt * stage;
  }
  if (spec.g) out.terminal = spec.g(path.positions[n]);
  out.total = out.running + out.terminal;
  return out;
}

double ensemble_cost(const FlowMeasure& m, const PathEnsemble& ensemble, const ProblemSpec& spec) {
  double total = 0.0;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    if (ensemble.weights[i] == 0.0) continue;
    total +=
        ensemble.weights[i] * path_cost(ensemble.paths[i], ensemble.controls[i], m, spec).total;
  }
  return total;
}

}  // namespace mfc
