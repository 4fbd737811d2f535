#include "mfc/strictify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfc/rng.hpp"

namespace mfc {

namespace {
constexpr double kFMatchTol = 1e-8;
constexpr double kSlackTol = 1e-9;
}  // namespace

JointMeasure lift_to_joint(const PathEnsemble& ensemble) {
  ensemble.validate();
  JointMeasure eta;
  eta.horizon = ensemble.horizon;
  eta.x_dim = static_cast<int>(ensemble.paths[0].positions[0].size());
  const int n = ensemble.steps();
  const double dt = ensemble.paths[0].dt();
  const double tscale = dt / ensemble.horizon;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const Path& path = ensemble.paths[i];
    const RelaxedControl& mu = ensemble.controls[i];
    for (int k = 0; k < n; ++k) {
      const double t = k * dt;
      for (std::size_t j = 0; j < mu.atoms->size(); ++j) {
        const double w = ensemble.weights[i] * tscale * mu.weights[k][j];
        if (w == 0.0) continue;
        eta.atoms.push_back({t, path.positions[k], mu.atoms->atoms[j]});
        eta.weights.push_back(w);
      }
    }
  }
  return eta;
}

FeedbackControl feedback_from(const PathEnsemble& ensemble, int t_bins, int x_bins) {
  return disintegrate(lift_to_joint(ensemble), t_bins, x_bins);
}

namespace {

/// Feedback atoms as a ControlAtoms set; appends the origin when absent
/// (with zero weight everywhere) so the RelaxedControl contract holds.
struct FbAtomSet {
  std::shared_ptr<const ControlAtoms> atoms;
  bool origin_appended = false;
};

FbAtomSet fb_atom_set(const std::vector<Vec>& fb_atoms) {
  std::vector<Vec> list = fb_atoms;
  bool appended = false;
  bool has_origin = false;
  for (const Vec& u : list)
    if (vec_norm(u) <= 1e-12) has_origin = true;
  if (!has_origin) {
    list.push_back(Vec(list[0].size(), 0.0));
    appended = true;
  }
  return {ControlAtoms::make(std::move(list)), appended};
}

}  // namespace

PathEnsemble replay_feedback(const FeedbackControl& fb, const AtomicMeasure& m0,
                             const FlowMeasure& m, const ProblemSpec& spec) {
  const int n = m.steps();
  const double dt = m.dt();
  auto [atom_set, appended] = fb_atom_set(fb.atoms);
  const std::size_t M = atom_set->size();

  PathEnsemble out;
  out.horizon = m.horizon;
  out.wrap = spec.wrap;
  for (std::size_t i = 0; i < m0.size(); ++i) {
    Path path;
    path.horizon = m.horizon;
    path.wrap = spec.wrap;
    RelaxedControl mu;
    mu.atoms = atom_set;
    mu.horizon = m.horizon;

    Vec x = m0.support[i];
    if (spec.wrap)
      for (double& c : x) c = wrap_unit(c);
    path.positions.push_back(x);
    for (int k = 0; k < n; ++k) {
      const auto& cell = fb.at(k * dt, x);
      std::vector<double> row(M, 0.0);
      for (std::size_t j = 0; j < cell.probs.size(); ++j) row[j] = cell.probs[j];
      const Vec inc =
          vec_scale(averaged_drift(x, row, *atom_set, m.at_step(k), spec), dt);
      Vec next = vec_add(x, inc);
      if (spec.wrap)
        for (double& c : next) c = wrap_unit(c);
      mu.weights.push_back(std::move(row));
      path.increments.push_back(inc);
      path.positions.push_back(next);
      x = std::move(next);
    }
    out.paths.push_back(std::move(path));
    out.controls.push_back(std::move(mu));
    out.weights.push_back(m0.weights[i]);
  }
  out.validate();
  return out;
}

namespace {

struct CellTargets {
  Vec f_target;
  double l_target = 0.0;
  double w_target = 0.0;  // q-moment target
};

CellTargets cell_targets(const std::vector<double>& probs, const std::vector<Vec>& atoms,
                         const ProblemSpec& spec, const AtomicMeasure& nu, const Vec& x) {
  CellTargets t;
  t.f_target.assign(spec.dim, 0.0);
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] == 0.0) continue;
    vec_axpy(t.f_target, probs[j], spec.f(x, atoms[j], nu));
    t.l_target += probs[j] * spec.L(x, atoms[j], nu);
    t.w_target += probs[j] * std::pow(vec_norm(atoms[j]), spec.q);
  }
  return t;
}

Vec clamp_box(Vec u, const Vec& lo, const Vec& hi) {
  for (std::size_t a = 0; a < u.size(); ++a) u[a] = std::clamp(u[a], lo[a], hi[a]);
  return u;
}

double fmatch(const ProblemSpec& spec, const AtomicMeasure& nu, const Vec& x, const Vec& u,
              const Vec& target) {
  const Vec fu = spec.f(x, u, nu);
  double s = 0.0;
  for (std::size_t c = 0; c < fu.size(); ++c) {
    const double d = fu[c] - target[c];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Damped Newton on the drift-matching residual, clamped to the box.
Vec newton_match(const ProblemSpec& spec, const AtomicMeasure& nu, const Vec& x, Vec u,
                 const Vec& target) {
  const int d = spec.dim;
  const int nc = spec.control_dim;
  const double h = 1e-7;
  double res = fmatch(spec, nu, x, u, target);
  for (int it = 0; it < 60 && res > 1e-13; ++it) {
    // finite-difference Jacobian of f in u (d x nc)
    std::vector<double> jac(static_cast<std::size_t>(d) * nc);
    for (int c = 0; c < nc; ++c) {
      Vec up = u, um = u;
      up[c] += h;
      um[c] -= h;
      const Vec fp = spec.f(x, up, nu);
      const Vec fm = spec.f(x, um, nu);
      for (int r = 0; r < d; ++r)
        jac[static_cast<std::size_t>(r) * nc + c] = (fp[r] - fm[r]) / (2.0 * h);
    }
    const Vec fu = spec.f(x, u, nu);
    Vec r(d);
    for (int c = 0; c < d; ++c) r[c] = fu[c] - target[c];

    // Levenberg step on the normal equations (control dimension is small).
    std::vector<double> jtj(static_cast<std::size_t>(nc) * nc, 0.0);
    Vec jtr(nc, 0.0);
    for (int a = 0; a < nc; ++a) {
      for (int b = 0; b < nc; ++b)
        for (int rr = 0; rr < d; ++rr)
          jtj[static_cast<std::size_t>(a) * nc + b] +=
              jac[static_cast<std::size_t>(rr) * nc + a] * jac[static_cast<std::size_t>(rr) * nc + b];
      for (int rr = 0; rr < d; ++rr)
        jtr[a] += jac[static_cast<std::size_t>(rr) * nc + a] * r[rr];
    }
    double lm = 1e-10;
    for (int a = 0; a < nc; ++a) lm = std::max(lm, 1e-8 * jtj[static_cast<std::size_t>(a) * nc + a]);
    for (int a = 0; a < nc; ++a) jtj[static_cast<std::size_t>(a) * nc + a] += lm;

    // Gaussian elimination (nc <= 3 in practice).
    Vec delta = jtr;
    {
      std::vector<double> A = jtj;
      for (int col = 0; col < nc; ++col) {
        int piv = col;
        for (int rr = col + 1; rr < nc; ++rr)
          if (std::abs(A[static_cast<std::size_t>(rr) * nc + col]) >
              std::abs(A[static_cast<std::size_t>(piv) * nc + col]))
            piv = rr;
        for (int cc = 0; cc < nc; ++cc)
          std::swap(A[static_cast<std::size_t>(col) * nc + cc],
                    A[static_cast<std::size_t>(piv) * nc + cc]);
        std::swap(delta[col], delta[piv]);
        const double dpiv = A[static_cast<std::size_t>(col) * nc + col];
        if (std::abs(dpiv) < 1e-300) return u;  // flat Jacobian, give up here
        for (int rr = col + 1; rr < nc; ++rr) {
          const double fac = A[static_cast<std::size_t>(rr) * nc + col] / dpiv;
          for (int cc = col; cc < nc; ++cc)
            A[static_cast<std::size_t>(rr) * nc + cc] -=
                fac * A[static_cast<std::size_t>(col) * nc + cc];
          delta[rr] -= fac * delta[col];
        }
      }
      for (int rr = nc - 1; rr >= 0; --rr) {
        for (int cc = rr + 1; cc < nc; ++cc)
          delta[rr] -= A[static_cast<std::size_t>(rr) * nc + cc] * delta[cc];
        delta[rr] /= A[static_cast<std::size_t>(rr) * nc + rr];
      }
    }

    double damp = 1.0;
    bool improved = false;
    for (int half = 0; half < 12; ++half) {
      Vec cand = u;
      vec_axpy(cand, -damp, delta);
      cand = clamp_box(std::move(cand), spec.box_lo, spec.box_hi);
      const double cres = fmatch(spec, nu, x, cand, target);
      if (cres < res) {
        u = std::move(cand);
        res = cres;
        improved = true;
        break;
      }
      damp *= 0.5;
    }
    if (!improved) break;
  }
  return u;
}

SelectionOutcome evaluate_candidate(const ProblemSpec& spec, const AtomicMeasure& nu, const Vec& x,
                                    const Vec& u, const CellTargets& t) {
  SelectionOutcome out;
  out.alpha = u;
  out.f_match = fmatch(spec, nu, x, u, t.f_target);
  out.z1 = spec.L(x, u, nu) - t.l_target;
  out.z2 = std::pow(vec_norm(u), spec.q) - t.w_target;
  out.feasible = out.f_match <= kFMatchTol && out.z1 <= kSlackTol && out.z2 <= kSlackTol;
  return out;
}

/// Deterministic box lattice used by the fallback search.
std::vector<Vec> fallback_grid(const ProblemSpec& spec) {
  const int nc = spec.control_dim;
  const int per_axis = nc == 1 ? 257 : (nc == 2 ? 33 : 9);
  std::vector<Vec> pts;
  std::vector<int> idx(nc, 0);
  while (true) {
    Vec u(nc);
    for (int a = 0; a < nc; ++a)
      u[a] = spec.box_lo[a] + (spec.box_hi[a] - spec.box_lo[a]) * idx[a] / (per_axis - 1);
    pts.push_back(std::move(u));
    int a = nc;
    while (a > 0) {
      --a;
      if (++idx[a] < per_axis) break;
      idx[a] = 0;
      if (a == 0) return pts;
    }
  }
}

}  // namespace

SelectionOutcome barycentric_selection(const std::vector<double>& cell_probs,
                                       const std::vector<Vec>& atoms, const ProblemSpec& spec,
                                       const AtomicMeasure& nu, const Vec& x) {
  if (cell_probs.size() != atoms.size() || atoms.empty())
    throw std::invalid_argument("barycentric_selection: cell/atom size mismatch");

  const CellTargets targets = cell_targets(cell_probs, atoms, spec, nu, x);

  // Barycenter start; exact already when f is affine in u.
  Vec bary(spec.control_dim, 0.0);
  for (std::size_t j = 0; j < atoms.size(); ++j) vec_axpy(bary, cell_probs[j], atoms[j]);

  Vec root = newton_match(spec, nu, x, bary, targets.f_target);
  SelectionOutcome best = evaluate_candidate(spec, nu, x, root, targets);
  if (best.feasible) return best;

  // Fallback: scan the box for alternative roots, polish the most
  // promising ones, keep the best (f_match, max slack) outcome.
  const auto grid = fallback_grid(spec);
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    ranked.emplace_back(fmatch(spec, nu, x, grid[i], targets.f_target), i);
  std::sort(ranked.begin(), ranked.end());
  const std::size_t tries = std::min<std::size_t>(8, ranked.size());
  for (std::size_t r = 0; r < tries; ++r) {
    const Vec polished = newton_match(spec, nu, x, grid[ranked[r].second], targets.f_target);
    const SelectionOutcome cand = evaluate_candidate(spec, nu, x, polished, targets);
    if (cand.feasible) return cand;
    const double cand_score = std::max({cand.f_match, cand.z1, cand.z2});
    const double best_score = std::max({best.f_match, best.z1, best.z2});
    if (cand_score < best_score) best = cand;
  }
  return best;
}

ConvexityReport convexity_probe(const ProblemSpec& spec, const FlowMeasure& m, double t,
                                const Vec& x, int pairs, std::uint64_t seed) {
  if (pairs < 1) throw std::invalid_argument("convexity_probe: pairs must be >= 1");
  const int node = std::clamp(static_cast<int>(std::floor(t / m.horizon * m.steps())), 0,
                              m.steps() - 1);
  const AtomicMeasure& nu = m.at_step(node);

  Rng rng(seed);
  ConvexityReport rep;
  rep.pairs = pairs;
  for (int i = 0; i < pairs; ++i) {
    Vec u1(spec.control_dim), u2(spec.control_dim);
    for (int a = 0; a < spec.control_dim; ++a) {
      u1[a] = rng.uniform(spec.box_lo[a], spec.box_hi[a]);
      u2[a] = rng.uniform(spec.box_lo[a], spec.box_hi[a]);
    }
    const double lambda = rng.uniform(0.01, 0.99);
    const SelectionOutcome out =
        barycentric_selection({1.0 - lambda, lambda}, {u1, u2}, spec, nu, x);
    if (!out.feasible) {
      ++rep.failures;
      if (!rep.first_failure) rep.first_failure = ConvexityWitness{u1, u2, lambda, out};
    }
  }
  rep.pass = rep.failures == 0;
  return rep;
}

StrictResult strict_equilibrium_from(const PathEnsemble& ensemble, const ProblemSpec& spec,
                                     int t_bins, int x_bins, double tol) {
  StrictResult result;
  const FeedbackControl fb = feedback_from(ensemble, t_bins, x_bins);
  const FlowMeasure m = empirical_flow(ensemble);
  const int n = m.steps();
  const double dt = m.dt();

  // Per-cell single-control selection, visiting cells in storage order.
  const int xc = fb.x_cells();
  std::vector<Vec> alpha_table(fb.cells.size());
  for (int tb = 0; tb < fb.t_bins; ++tb) {
    const int node = std::min(n - 1, static_cast<int>(std::floor((tb + 0.5) / fb.t_bins * n)));
    const AtomicMeasure& nu = m.at_step(node);
    for (int xb = 0; xb < xc; ++xb) {
      // representative point: center of the bin, axis by axis
      Vec x(fb.x_dim);
      int rem = xb;
      for (int a = fb.x_dim - 1; a >= 0; --a) {
        x[a] = (rem % fb.x_bins + 0.5) / fb.x_bins;
        rem /= fb.x_bins;
      }
      const auto& cell = fb.cell(tb, xb);
      const SelectionOutcome out = barycentric_selection(cell.probs, fb.atoms, spec, nu, x);
      result.cells.push_back({tb, xb, cell.mass, out});
      if (!out.feasible) {
        result.witness_t_bin = tb;
        result.witness_x_bin = xb;
        result.witness_atoms = fb.atoms;
        result.witness_probs = cell.probs;
        result.witness_outcome = out;
        return result;  // success stays false
      }
      alpha_table[static_cast<std::size_t>(tb) * xc + xb] = out.alpha;
    }
  }

  // Pure closed-loop replay from the ensemble's own initial law.
  const AtomicMeasure m0 = m.nodes[0];
  std::vector<Vec> strict_atoms;
  auto atom_index = [&strict_atoms](const Vec& u) {
    for (std::size_t i = 0; i < strict_atoms.size(); ++i)
      if (vec_max_abs_diff(strict_atoms[i], u) <= 1e-12) return i;
    strict_atoms.push_back(u);
    return strict_atoms.size() - 1;
  };
  std::vector<std::vector<std::size_t>> chosen(m0.size());
  std::vector<Path> pure_paths(m0.size());
  for (std::size_t i = 0; i < m0.size(); ++i) {
    Path path;
    path.horizon = m.horizon;
    path.wrap = spec.wrap;
    Vec x = m0.support[i];
    path.positions.push_back(x);
    for (int k = 0; k < n; ++k) {
      const int tb = fb.t_bin_of(k * dt);
      const int xb = fb.x_bin_of(x);
      const Vec& alpha = alpha_table[static_cast<std::size_t>(tb) * xc + xb];
      chosen[i].push_back(atom_index(alpha));
      const Vec inc = vec_scale(spec.f(x, alpha, m.at_step(k)), dt);
      Vec next = vec_add(x, inc);
      if (spec.wrap)
        for (double& c : next) c = wrap_unit(c);
      path.increments.push_back(inc);
      path.positions.push_back(next);
      x = std::move(next);
    }
    pure_paths[i] = std::move(path);
  }

  auto [atom_set, appended] = fb_atom_set(strict_atoms);
  PathEnsemble pure;
  pure.horizon = m.horizon;
  pure.wrap = spec.wrap;
  for (std::size_t i = 0; i < m0.size(); ++i) {
    RelaxedControl mu;
    mu.atoms = atom_set;
    mu.horizon = m.horizon;
    for (int k = 0; k < n; ++k) {
      std::vector<double> row(atom_set->size(), 0.0);
      row[chosen[i][k]] = 1.0;
      mu.weights.push_back(std::move(row));
    }
    pure.paths.push_back(std::move(pure_paths[i]));
    pure.controls.push_back(std::move(mu));
    pure.weights.push_back(m0.weights[i]);
  }
  pure.validate();

  result.cost_original = ensemble_cost(m, ensemble, spec);
  result.cost_pure = ensemble_cost(m, pure, spec);
  result.flow_gap = flow_distance(empirical_flow(pure), m);
  result.pure = std::move(pure);
  result.success = true;
  result.cost_preserved = result.cost_pure <= result.cost_original + tol;
  return result;
}

}  // namespace mfc
