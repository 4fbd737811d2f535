#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mfc/control.hpp"
#include "mfc/torus.hpp"

namespace mfc {

enum class Domain { Torus, Control };

/// Weighted finite support on the torus or on the control space.
/// Weights are nonnegative and sum to 1 within 1e-12.
struct AtomicMeasure {
  Domain domain = Domain::Torus;
  std::vector<Vec> support;
  std::vector<double> weights;

  /// Validates and (for the torus) canonicalizes coordinates.
  static AtomicMeasure create(Domain domain, std::vector<Vec> support,
                              std::vector<double> weights);

  static AtomicMeasure dirac(Domain domain, Vec point);

  std::size_t size() const { return support.size(); }
  std::size_t dim() const { return support.empty() ? 0 : support[0].size(); }
};

/// Ground distance for a domain tag.
double ground_dist(Domain domain, const Vec& a, const Vec& b);

/// Image measure under a pointwise map; atoms landing within 1e-12 of
/// each other are merged (first-occurrence order kept).
AtomicMeasure pushforward(const AtomicMeasure& m, const std::function<Vec(const Vec&)>& map);

/// Merge near-duplicate support points (1e-12 in the ground metric).
AtomicMeasure merge_atoms(const AtomicMeasure& m);

/// Kantorovich-Rubinstein distance.  Dispatches to the 1-d closed form
/// when available, otherwise to the exact transport solve.
double w1(const AtomicMeasure& a, const AtomicMeasure& b);

/// Exact LP/network backend (any dimension).
double w1_lp(const AtomicMeasure& a, const AtomicMeasure& b);

/// Exact 1-d closed form: circular CDF matching optimized over the shift
/// (torus) or plain CDF area (control line).  Requires dim == 1.
double w1_closed_form_1d(const AtomicMeasure& a, const AtomicMeasure& b);

/// Finite measure on [0,T] x T^d x R^n.
struct JointMeasure {
  struct Atom {
    double t;
    Vec x;
    Vec u;
  };
  double horizon = 1.0;
  int x_dim = 1;
  std::vector<Atom> atoms;
  std::vector<double> weights;

  double total_mass() const;
};

/// Discrete disintegration of `eta` over a (t_bins x x_bins^d) grid: each
/// nonempty cell gets the renormalized restriction of the control
/// marginal; empty cells copy the nearest nonempty cell (time distance
/// plus wrapped bin distance, ties toward the smaller flat index).
/// The atom list is the deduplicated list of control values of `eta`.
FeedbackControl disintegrate(const JointMeasure& eta, int t_bins, int x_bins);

}  // namespace mfc
