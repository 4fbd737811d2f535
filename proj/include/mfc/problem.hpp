#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mfc/control.hpp"
#include "mfc/measures.hpp"
#include "mfc/rng.hpp"
#include "mfc/torus.hpp"

namespace mfc {

/// Full problem definition: dynamics, running cost, growth/Lipschitz
/// constants, and the control discretization box.  Evaluators must be
/// pure; x is passed as canonical coordinates (wrapped when `wrap`).
struct ProblemSpec {
  std::string name = "custom";
  int dim = 1;          // torus/state dimension d
  int control_dim = 1;  // control dimension n
  double horizon = 1.0;
  double p = 1.0;
  double q = 2.0;
  double budget = 1.0;  // q-moment budget R
  bool wrap = true;     // false: state lives on R^d (no torus wrap)

  std::function<Vec(const Vec& x, const Vec& u, const AtomicMeasure& nu)> f;
  std::function<double(const Vec& x, const Vec& u, const AtomicMeasure& nu)> L;
  /// Optional analytic derivatives; finite differences are used when unset.
  std::function<Vec(const Vec& x, const Vec& u, const AtomicMeasure& nu)> dLdx;
  /// Row-major d x d Jacobian of f in x.
  std::function<Vec(const Vec& x, const Vec& u, const AtomicMeasure& nu)> dfdx;
  /// Optional terminal cost and its gradient.
  std::function<double(const Vec& x)> g;
  std::function<Vec(const Vec& x)> dg;

  // Declared constants for the growth and regularity bounds.
  double C = 1.0;       // |f| <= C (1 + |u|^p)
  double C1 = 1.0;      // |L| <= C1 (1 + |u|^q)
  double C2 = 1.0;      // |dL/dx| <= C2 (1 + |u|^q)
  double lip_x_f = 0.0;
  double lip_nu_f = 0.0;
  double l2_slope = 0.0;   // |L(nu1) - L(nu2)| <= slope * d1 + offset
  double l2_offset = 0.0;

  Vec box_lo, box_hi;  // control atom box, must contain the origin
  int atoms_per_axis = 3;

  std::map<std::string, double> params;  // builtin parameters, echoed in manifests

  std::shared_ptr<const ControlAtoms> make_atoms() const;
  void validate() const;  // throws on malformed definitions

  Vec eval_dLdx(const Vec& x, const Vec& u, const AtomicMeasure& nu) const;
  Vec eval_dfdx(const Vec& x, const Vec& u, const AtomicMeasure& nu) const;
  Vec eval_dg(const Vec& x) const;
  double state_dist(const Vec& a, const Vec& b) const;
};

struct DerivedConstants {
  double K = 0.0;              // L_{q/p} velocity bound
  double r = 0.0;              // Hoelder exponent denominator, p/q + 1/r = 1
  double moment_p_bound = 0.0; // R^{p/q} T^{1/r}
};

DerivedConstants derive_constants(const ProblemSpec& spec);

struct AssumptionCheck {
  std::string name;
  bool pass = true;
  double worst_ratio = 0.0;  // observed / allowed, max over samples
  int violations = 0;
  std::string witness;       // sample realizing the worst ratio
};

struct BoundsReport {
  int samples = 0;
  std::uint64_t seed = 0;
  std::vector<AssumptionCheck> checks;
  bool all_pass() const;
};

/// Samples (x, u, nu) with u in the declared box and checks every declared
/// growth/Lipschitz bound; fully reproducible for a fixed seed.
BoundsReport validate_assumptions(const ProblemSpec& spec, int samples, std::uint64_t seed);

/// Benchmark library: zero, linear-quadratic, double-well, crowd-aversion,
/// resnet-1d.
ProblemSpec builtin_spec(const std::string& name);

/// Flat key=value spec file, or "builtin:<name>".
ProblemSpec load_spec_file(const std::string& path);
ProblemSpec spec_from_arg(const std::string& arg);

// Sampling utilities shared by the validators, the CLI and the tests.
AtomicMeasure random_atomic_torus(int dim, std::size_t max_atoms, Rng& rng);
std::vector<double> random_stochastic_row(std::size_t m, Rng& rng);
Vec random_box_point(const Vec& lo, const Vec& hi, Rng& rng);

}  // namespace mfc
