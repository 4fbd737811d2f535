#pragma once

#include "mfc/dynamics.hpp"

namespace mfc {

struct CostBreakdown {
  double running = 0.0;
  double terminal = 0.0;
  double total = 0.0;
};

/// Running cost by left-endpoint quadrature (matching the Euler scheme)
/// plus the optional terminal cost.
CostBreakdown path_cost(const Path& path, const RelaxedControl& mu, const FlowMeasure& m,
                        const ProblemSpec& spec);

/// Weight-averaged total path cost of the ensemble; linear in the weights.
double ensemble_cost(const FlowMeasure& m, const PathEnsemble& ensemble, const ProblemSpec& spec);

}  // namespace mfc
