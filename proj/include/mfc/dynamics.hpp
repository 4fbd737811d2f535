#pragma once

#include <vector>

#include "mfc/control.hpp"
#include "mfc/measures.hpp"
#include "mfc/problem.hpp"

namespace mfc {

/// Discrete trajectory.  Positions are canonical (wrapped for torus
/// problems); increments keep the pre-wrap steps so velocities and the
/// quadrature identity refer to the lifted path.
struct Path {
  double horizon = 1.0;
  bool wrap = true;
  std::vector<Vec> positions;   // steps + 1 nodes
  std::vector<Vec> increments;  // one per step

  int steps() const { return static_cast<int>(increments.size()); }
  double dt() const { return horizon / steps(); }
};

/// Time-grid indexed flow of atomic measures; node 0 is the initial law.
struct FlowMeasure {
  double horizon = 1.0;
  std::vector<AtomicMeasure> nodes;  // steps + 1

  int steps() const { return static_cast<int>(nodes.size()) - 1; }
  double dt() const { return horizon / steps(); }
  /// Flow value on [t_k, t_{k+1}): the left node.
  const AtomicMeasure& at_step(int k) const { return nodes[k]; }
};

/// Weighted finite family of (trajectory, relaxed control) pairs.
struct PathEnsemble {
  double horizon = 1.0;
  bool wrap = true;
  std::vector<double> weights;
  std::vector<Path> paths;
  std::vector<RelaxedControl> controls;

  std::size_t size() const { return paths.size(); }
  int steps() const { return paths.empty() ? 0 : paths[0].steps(); }
  void validate() const;
};

enum class Scheme { Euler, RK4 };

/// Atom-averaged drift sum_j w_j f(x, u_j, nu); rows with zero weight on
/// an atom skip its f evaluation.
Vec averaged_drift(const Vec& x, const std::vector<double>& row, const ControlAtoms& atoms,
                   const AtomicMeasure& nu, const ProblemSpec& spec);

/// Explicit Euler over a per-step drift callback; the single stepping
/// routine behind both the trajectory integrator and the residual
/// network forward pass.
Path integrate_steps(const Vec& x0, const std::function<Vec(int, const Vec&)>& drift,
                     double horizon, int steps, bool wrap);

/// Integrates the relaxed state equation against a fixed flow.  Euler is
/// the reference scheme (quadrature-exact for the support identity); RK4
/// freezes the control row and flow node within each step.
Path integrate_path(const Vec& x0, const RelaxedControl& mu, const FlowMeasure& m,
                    const ProblemSpec& spec, Scheme scheme = Scheme::Euler);

struct EnsembleParticle {
  Vec x0;
  RelaxedControl control;
  double weight = 1.0;
};

PathEnsemble flow_ensemble(const std::vector<EnsembleParticle>& particles, const FlowMeasure& m,
                           const ProblemSpec& spec, Scheme scheme = Scheme::Euler);

/// Node-wise push-forward of the path ensemble: m(t_k) = e_{t_k} law.
FlowMeasure empirical_flow(const PathEnsemble& ensemble);

/// L_{q/p} norm of the lifted velocity.
double velocity_budget(const Path& path, const ProblemSpec& spec);

struct HolderReport {
  double max_ratio = 0.0;
  int arg_i = 0, arg_j = 0;
  bool pass = true;
};

/// Checks d1(m(t_i), m(t_j)) <= K |t_i - t_j|^{1/r} over all node pairs.
HolderReport check_holder(const FlowMeasure& m, double K, double r);

/// Max deviation of the lifted paths from the Euler quadrature of their
/// own averaged drift; zero (to round-off) for Euler-built ensembles.
double support_residual(const PathEnsemble& ensemble, const FlowMeasure& m,
                        const ProblemSpec& spec);

/// Flow frozen at the initial law.
FlowMeasure constant_flow(const AtomicMeasure& m0, double horizon, int steps);

/// Node-wise measure mixture (1-lambda) a + lambda b.  Atoms within
/// 1e-12 merge; atoms below the prune threshold are dropped and the
/// node renormalized (no-op when nothing is pruned).
FlowMeasure mix_flows(const FlowMeasure& a, const FlowMeasure& b, double lambda,
                      double prune_below = 1e-15);

/// sup over nodes of d1(a(t_k), b(t_k)).
double flow_distance(const FlowMeasure& a, const FlowMeasure& b);

}  // namespace mfc
