#pragma once

#include <memory>
#include <vector>

#include "mfc/torus.hpp"

namespace mfc {

/// Fixed finite action set in R^n shared by every control of a run.
/// The origin must be a member: it is the always-feasible fallback.
struct ControlAtoms {
  std::vector<Vec> atoms;
  std::size_t origin_index = 0;

  /// Validates distinctness and locates the origin.
  static std::shared_ptr<const ControlAtoms> make(std::vector<Vec> atoms);

  /// Uniform lattice over a box, per_axis points per axis.  The box must
  /// contain the origin and the lattice is required to hit it exactly.
  static std::shared_ptr<const ControlAtoms> from_box(const Vec& lo, const Vec& hi,
                                                      int per_axis);

  std::size_t size() const { return atoms.size(); }
  std::size_t dim() const { return atoms.empty() ? 0 : atoms[0].size(); }

  /// Index of the atom equal to u within 1e-12 (max-norm); -1 if none.
  int find(const Vec& u) const;
};

/// Time-indexed probability weights over a ControlAtoms set:
/// row k is the action distribution on [t_k, t_{k+1}).
struct RelaxedControl {
  std::shared_ptr<const ControlAtoms> atoms;
  double horizon = 1.0;
  std::vector<std::vector<double>> weights;  // steps x atom-count, row-stochastic

  int steps() const { return static_cast<int>(weights.size()); }
  double dt() const { return horizon / static_cast<double>(steps()); }

  /// Every row equal to `row` (validated as a probability vector).
  static RelaxedControl constant(std::shared_ptr<const ControlAtoms> atoms, double horizon,
                                 int steps, const std::vector<double>& row);

  /// All mass on one atom at every step.
  static RelaxedControl constant_dirac(std::shared_ptr<const ControlAtoms> atoms, double horizon,
                                       int steps, std::size_t atom_index);

  void validate() const;  // throws on broken invariants
};

/// q-th (or general s-th) action moment: sum_k dt sum_j w_kj |u_j|^s.
double moment(const RelaxedControl& mu, double s);

/// Projection into the budget set: mixes toward the origin Dirac with the
/// smallest factor reaching moment(q) == budget.  Identity when feasible.
RelaxedControl enforce_budget(const RelaxedControl& mu, double budget, double q);

/// Normalized Kantorovich distance between controls seen as measures on
/// [0,T] x R^n with ground metric |dt| + |du|.
double control_distance(const RelaxedControl& a, const RelaxedControl& b);

/// One-hot rows selecting the given per-step atom values; values must be
/// atoms of the set (no silent snapping).
RelaxedControl dirac_control(std::shared_ptr<const ControlAtoms> atoms, double horizon,
                             const std::vector<Vec>& values);

/// Euclidean projection of v onto the probability simplex.  Deterministic:
/// equal entries are resolved by index order in the internal sort.
std::vector<double> project_to_simplex(const std::vector<double>& v);

/// (time-bin x space-bin) table of action distributions, the discrete
/// disintegration of a joint (t, x, u) measure.  Cells keep both the
/// normalized row and the raw accumulated mass so reassembly is exact.
struct FeedbackControl {
  struct Cell {
    std::vector<double> probs;  // probability vector over atoms
    std::vector<double> raw;    // accumulated (unnormalized) weights
    double mass = 0.0;
    bool filled_from_neighbor = false;
  };

  std::vector<Vec> atoms;
  double horizon = 1.0;
  int t_bins = 1;
  int x_bins = 1;  // per torus axis
  int x_dim = 1;
  std::vector<Cell> cells;  // t-major, then flattened x index

  int x_cells() const {
    int c = 1;
    for (int a = 0; a < x_dim; ++a) c *= x_bins;
    return c;
  }
  int t_bin_of(double t) const;
  int x_bin_of(const Vec& x) const;
  const Cell& cell(int tb, int xb) const { return cells[tb * x_cells() + xb]; }
  Cell& cell(int tb, int xb) { return cells[tb * x_cells() + xb]; }
  const Cell& at(double t, const Vec& x) const { return cell(t_bin_of(t), x_bin_of(x)); }
};

}  // namespace mfc
