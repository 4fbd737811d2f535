#pragma once

#include <string>
#include <vector>

#include "mfc/cost.hpp"
#include "mfc/dynamics.hpp"

namespace mfc {

struct BestResponse {
  RelaxedControl control;
  Path path;
  double cost = 0.0;
  std::string method;
  int iterations = 0;
  double grad_norm = 0.0;  // projected-gradient mapping norm (grad method)
};

struct DpOptions {
  int x_grid = 64;
  int simplex_lattice = 4;  // mixture denominator for two-atom lattice actions
};

struct GradOptions {
  int max_iters = 300;
  double step = 0.5;
  double grad_tol = 1e-8;
};

enum class BrMethod { Dp, Grad };

struct SolverOptions {
  BrMethod method = BrMethod::Dp;
  DpOptions dp;
  GradOptions grad;
};

/// Backward dynamic programming oracle on the 1-d torus.  Actions are all
/// pure atoms plus all two-atom lattice mixtures with the given
/// denominator.  The accumulated q-moment joins the state (conservatively
/// rounded up) whenever the budget can bind; greedy reconstruction tracks
/// the exact moment and re-evaluates stage costs off-grid.  Ties resolve
/// by (value, action moment, action index).
BestResponse best_response_dp(const Vec& x0, const FlowMeasure& m, const ProblemSpec& spec,
                              const DpOptions& opt = {});

/// Projected-gradient descent on the control weights with the exact
/// discrete adjoint of the Euler/left-quadrature pair; fixed step with
/// halving on cost increase; accepted steps never increase the cost.
BestResponse best_response_grad(const Vec& x0, const FlowMeasure& m, const ProblemSpec& spec,
                                const RelaxedControl& init, const GradOptions& opt = {});

/// One best response per initial atom, weights inherited from m0.
PathEnsemble best_response_measure(const FlowMeasure& m, const AtomicMeasure& m0,
                                   const ProblemSpec& spec, const SolverOptions& opt = {});

struct IterationRecord {
  int iteration = 0;
  double consistency_gap = 0.0;
  double optimality_gap = 0.0;
};

struct EquilibriumResult {
  PathEnsemble ensemble;
  FlowMeasure flow;          // empirical flow of the ensemble
  double consistency_gap = 0.0;
  double optimality_gap = 0.0;
  std::vector<IterationRecord> trace;
  double damping = 0.5;
  bool converged = false;
  int iterations = 0;
};

struct FixedPointOptions {
  int steps = 32;            // time grid
  double damping = 0.5;
  int max_iters = 200;
  double tol = 1e-3;
  double prune_below = 1e-12;  // mixture support pruning
  SolverOptions solver;
};

/// Damped best-response iteration on the flow.  Gaps are certification
/// style: a fresh best response against the candidate's own empirical
/// flow.  Convergence is reported only when observed.
EquilibriumResult fixed_point_iterate(const ProblemSpec& spec, const AtomicMeasure& m0,
                                      const FixedPointOptions& opt = {});

struct CertifyReport {
  double initial_gap = 0.0;      // d1(e_0 law, declared m0)
  double support_residual = 0.0;
  double optimality_gap = 0.0;
  bool pass = false;
};

/// Re-derives the flow from the ensemble and checks the equilibrium
/// conditions at tolerance tol.
CertifyReport certify(const PathEnsemble& ensemble, const AtomicMeasure& m0,
                      const ProblemSpec& spec, double tol, const SolverOptions& opt = {});

}  // namespace mfc
