#pragma once

#include <optional>
#include <vector>

#include "mfc/cost.hpp"
#include "mfc/dynamics.hpp"

namespace mfc {

/// Joint (t, x, u) occupation measure of an ensemble: atoms
/// (t_k, gamma_i(t_k), u_j) weighted by W_i * dt/T * w_i[k][j].
JointMeasure lift_to_joint(const PathEnsemble& ensemble);

/// Binned disintegration of the lifted ensemble into a feedback table.
FeedbackControl feedback_from(const PathEnsemble& ensemble, int t_bins, int x_bins);

/// Closed-loop integration of every m0 atom under the feedback table:
/// each step reads the cell of the path's own current (t, x).
PathEnsemble replay_feedback(const FeedbackControl& fb, const AtomicMeasure& m0,
                             const FlowMeasure& m, const ProblemSpec& spec);

struct SelectionOutcome {
  bool feasible = false;
  Vec alpha;            // selected control
  double z1 = 0.0;      // L slack (<= 0 when feasible)
  double z2 = 0.0;      // moment slack (<= 0 when feasible)
  double f_match = 0.0; // residual of the drift-matching equation
};

/// Finds a single control matching the cell's mean drift with no increase
/// of cost or q-moment: damped Newton from the barycenter with a box grid
/// fallback.  Infeasibility (expected exactly when the convexity condition
/// fails) is reported through the outcome, never by exception.
SelectionOutcome barycentric_selection(const std::vector<double>& cell_probs,
                                       const std::vector<Vec>& atoms, const ProblemSpec& spec,
                                       const AtomicMeasure& nu, const Vec& x);

struct ConvexityWitness {
  Vec u1, u2;
  double lambda = 0.5;
  SelectionOutcome outcome;
};

struct ConvexityReport {
  int pairs = 0;
  int failures = 0;
  bool pass = true;
  std::optional<ConvexityWitness> first_failure;
};

/// Samples control pairs and mixing weights and searches for a matching
/// single control; failures witness non-convexity of the (L, |u|^q, f)
/// epigraph set.
ConvexityReport convexity_probe(const ProblemSpec& spec, const FlowMeasure& m, double t,
                                const Vec& x, int pairs, std::uint64_t seed);

struct CellSelection {
  int t_bin = 0;
  int x_bin = 0;
  double mass = 0.0;
  SelectionOutcome outcome;
};

struct StrictResult {
  bool success = false;        // every cell admitted a selection
  bool cost_preserved = false; // J(m, P0) <= J(m, P) + tol
  PathEnsemble pure;           // valid on success
  double cost_original = 0.0;  // J(m, P)
  double cost_pure = 0.0;      // J(m, P0)
  double flow_gap = 0.0;       // sup_t d1 between the two empirical flows
  std::vector<CellSelection> cells;
  // populated on abort:
  int witness_t_bin = -1;
  int witness_x_bin = -1;
  std::vector<Vec> witness_atoms;
  std::vector<double> witness_probs;
  SelectionOutcome witness_outcome;
};

/// Full pipeline: feedback table, per-cell selection, pure closed-loop
/// replay.  Aborts (success = false) with the offending cell when some
/// cell admits no selection.
StrictResult strict_equilibrium_from(const PathEnsemble& ensemble, const ProblemSpec& spec,
                                     int t_bins, int x_bins, double tol);

}  // namespace mfc
