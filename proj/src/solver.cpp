#include "mfc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfc/parallel.hpp"

namespace mfc {

namespace {

struct DpAction {
  std::vector<std::pair<std::size_t, double>> entries;  // (atom, weight)
  double moment_rate = 0.0;                             // sum w |u|^q
};

std::vector<DpAction> build_actions(const ControlAtoms& atoms, double q, int lattice) {
  const std::size_t m = atoms.size();
  std::vector<double> pw(m);
  for (std::size_t j = 0; j < m; ++j) pw[j] = std::pow(vec_norm(atoms.atoms[j]), q);

  std::vector<DpAction> actions;
  for (std::size_t j = 0; j < m; ++j) actions.push_back({{{j, 1.0}}, pw[j]});
  for (std::size_t j1 = 0; j1 < m; ++j1)
    for (std::size_t j2 = j1 + 1; j2 < m; ++j2)
      for (int i = 1; i < lattice; ++i) {
        const double lam = static_cast<double>(i) / lattice;
        actions.push_back(
            {{{j1, 1.0 - lam}, {j2, lam}}, (1.0 - lam) * pw[j1] + lam * pw[j2]});
      }
  return actions;
}

std::vector<double> action_row(const DpAction& a, std::size_t m) {
  std::vector<double> row(m, 0.0);
  for (const auto& [j, w] : a.entries) row[j] = w;
  return row;
}

class DpTable {
 public:
  DpTable(const FlowMeasure& m, const ProblemSpec& spec, const DpOptions& opt)
      : m_(m), spec_(spec), opt_(opt) {
    if (spec.dim != 1)
      throw std::invalid_argument("best_response_dp: only torus dimension 1 is supported");
    if (!spec.wrap)
      throw std::invalid_argument("best_response_dp: requires a wrapped (torus) state space");
    if (opt.x_grid < 8) throw std::invalid_argument("best_response_dp: x_grid must be >= 8");
    if (opt.simplex_lattice < 1)
      throw std::invalid_argument("best_response_dp: simplex_lattice must be >= 1");

    atoms_ = spec.make_atoms();
    actions_ = build_actions(*atoms_, spec.q, opt.simplex_lattice);
    n_steps_ = m.steps();
    dt_ = m.dt();

    // Budget levels: a single level when the whole simplex is feasible.
    double max_rate = 0.0;
    for (const auto& a : actions_) max_rate = std::max(max_rate, a.moment_rate);
    budget_slack_ = max_rate * spec.horizon <= spec.budget * (1.0 + 1e-12);
    levels_ = budget_slack_ ? 1 : opt.x_grid;

    const int G = opt.x_grid;
    grid_x_.resize(G);
    for (int i = 0; i < G; ++i) grid_x_[i] = static_cast<double>(i) / G;

    // Per (step, grid point, atom): f value and L value.
    fval_.assign(static_cast<std::size_t>(n_steps_) * G * atoms_->size(), 0.0);
    lval_ = fval_;
    for (int k = 0; k < n_steps_; ++k) {
      const AtomicMeasure& nu = m.at_step(k);
      for (int i = 0; i < G; ++i) {
        const Vec x{grid_x_[i]};
        for (std::size_t j = 0; j < atoms_->size(); ++j) {
          const std::size_t idx = at(k, i, j);
          fval_[idx] = spec.f(x, atoms_->atoms[j], nu)[0];
          lval_[idx] = spec.L(x, atoms_->atoms[j], nu);
        }
      }
    }

    // Backward sweep.  value_[k] has levels_ * G entries (level-major).
    value_.assign(n_steps_ + 1, std::vector<double>(static_cast<std::size_t>(levels_) * G, 0.0));
    for (int i = 0; i < G; ++i) {
      const double vg = spec.g ? spec.g(Vec{grid_x_[i]}) : 0.0;
      for (int b = 0; b < levels_; ++b) value_[n_steps_][b * G + i] = vg;
    }
    for (int k = n_steps_ - 1; k >= 0; --k) {
      for (int b = 0; b < levels_; ++b) {
        const double used = level_value(b);
        for (int i = 0; i < G; ++i) {
          double best = std::numeric_limits<double>::infinity();
          double best_rate = 0.0;
          for (const auto& a : actions_) {
            const double bud = used + dt_ * a.moment_rate;
            if (bud > spec.budget * (1.0 + 1e-9) + 1e-12) continue;
            double drift = 0.0, stage = 0.0;
            for (const auto& [j, w] : a.entries) {
              drift += w * fval_[at(k, i, j)];
              stage += w * lval_[at(k, i, j)];
            }
            const double xn = grid_x_[i] + dt_ * drift;
            const int bn = level_index(bud);
            const double v =
                dt_ * stage + interp_level(value_[k + 1], bn, xn);
            if (v < best - 1e-15 ||
                (std::abs(v - best) <= 1e-15 && a.moment_rate < best_rate)) {
              best = v;
              best_rate = a.moment_rate;
            }
          }
          value_[k][b * G + i] = best;
        }
      }
    }
  }

  BestResponse reconstruct(const Vec& x0) const {
    RelaxedControl mu;
    mu.atoms = atoms_;
    mu.horizon = spec_.horizon;
    mu.weights.reserve(n_steps_);

    Vec x{wrap_unit(x0[0])};
    double used = 0.0;
    for (int k = 0; k < n_steps_; ++k) {
      const AtomicMeasure& nu = m_.at_step(k);
      std::vector<double> latom(atoms_->size()), fatom(atoms_->size());
      for (std::size_t j = 0; j < atoms_->size(); ++j) {
        latom[j] = spec_.L(x, atoms_->atoms[j], nu);
        fatom[j] = spec_.f(x, atoms_->atoms[j], nu)[0];
      }
      int best_a = -1;
      double best_v = std::numeric_limits<double>::infinity();
      double best_rate = 0.0;
      for (std::size_t ai = 0; ai < actions_.size(); ++ai) {
        const auto& a = actions_[ai];
        const double bud = used + dt_ * a.moment_rate;
        if (bud > spec_.budget * (1.0 + 1e-9) + 1e-12) continue;
        double drift = 0.0, stage = 0.0;
        for (const auto& [j, w] : a.entries) {
          drift += w * fatom[j];
          stage += w * latom[j];
        }
        const double v = dt_ * stage +
                         interp_level(value_[k + 1], level_index(bud), x[0] + dt_ * drift);
        if (best_a < 0 || v < best_v - 1e-15 ||
            (std::abs(v - best_v) <= 1e-15 && a.moment_rate < best_rate)) {
          best_a = static_cast<int>(ai);
          best_v = v;
          best_rate = a.moment_rate;
        }
      }
      if (best_a < 0) throw std::runtime_error("best_response_dp: no feasible action");
      const auto& act = actions_[best_a];
      mu.weights.push_back(action_row(act, atoms_->size()));
      used += dt_ * act.moment_rate;

      // advance exactly like the integrator does
      const Vec drift_vec = averaged_drift(x, mu.weights.back(), *atoms_, nu, spec_);
      x = Vec{wrap_unit(x[0] + dt_ * drift_vec[0])};
    }

    BestResponse br;
    br.control = std::move(mu);
    br.path = integrate_path(x0, br.control, m_, spec_, Scheme::Euler);
    br.cost = path_cost(br.path, br.control, m_, spec_).total;
    br.method = "dp";
    br.iterations = n_steps_;
    return br;
  }

 private:
  std::size_t at(int k, int i, std::size_t j) const {
    return (static_cast<std::size_t>(k) * opt_.x_grid + i) * atoms_->size() + j;
  }
  double level_value(int b) const {
    return levels_ == 1 ? 0.0 : spec_.budget * b / (levels_ - 1);
  }
  int level_index(double used) const {
    if (levels_ == 1) return 0;
    const int b = static_cast<int>(std::ceil(used / spec_.budget * (levels_ - 1) - 1e-12));
    return std::clamp(b, 0, levels_ - 1);
  }
  double interp_level(const std::vector<double>& table, int level, double x) const {
    const int G = opt_.x_grid;
    const double g = wrap_unit(x) * G;
    int i0 = static_cast<int>(std::floor(g));
    if (i0 >= G) i0 = G - 1;
    const double frac = g - i0;
    const int i1 = (i0 + 1) % G;
    return (1.0 - frac) * table[level * G + i0] + frac * table[level * G + i1];
  }

  const FlowMeasure& m_;
  const ProblemSpec& spec_;
  DpOptions opt_;
  std::shared_ptr<const ControlAtoms> atoms_;
  std::vector<DpAction> actions_;
  int n_steps_ = 0;
  double dt_ = 0.0;
  bool budget_slack_ = true;
  int levels_ = 1;
  std::vector<double> grid_x_;
  std::vector<double> fval_, lval_;
  std::vector<std::vector<double>> value_;
};

}  // namespace

BestResponse best_response_dp(const Vec& x0, const FlowMeasure& m, const ProblemSpec& spec,
                              const DpOptions& opt) {
  spec.validate();
  DpTable table(m, spec, opt);
  return table.reconstruct(x0);
}

namespace {

/// Exact gradient of the Euler/left-quadrature cost in the weight matrix.
/// The multiplier of the step-k constraint is the costate after step k.
std::vector<std::vector<double>> adjoint_gradient(const Path& path, const RelaxedControl& mu,
                                                  const FlowMeasure& m, const ProblemSpec& spec) {
  const int n = path.steps();
  const double dt = path.dt();
  const std::size_t M = mu.atoms->size();
  const int d = spec.dim;
  std::vector<std::vector<double>> grad(n, std::vector<double>(M, 0.0));

  Vec p = spec.eval_dg(path.positions[n]);
  for (int k = n - 1; k >= 0; --k) {
    const Vec& x = path.positions[k];
    const AtomicMeasure& nu = m.at_step(k);
    const auto& row = mu.weights[k];

    for (std::size_t j = 0; j < M; ++j) {
      const double lv = spec.L(x, mu.atoms->atoms[j], nu);
      const double fv = vec_dot(p, spec.f(x, mu.atoms->atoms[j], nu));
      grad[k][j] = dt * (lv + fv);
      if (!std::isfinite(grad[k][j]))
        throw std::runtime_error("best_response_grad: non-finite gradient at step " +
                                 std::to_string(k));
    }

    Vec dl(d, 0.0);
    Vec jac(static_cast<std::size_t>(d) * d, 0.0);
    for (std::size_t j = 0; j < M; ++j) {
      if (row[j] == 0.0) continue;
      vec_axpy(dl, row[j], spec.eval_dLdx(x, mu.atoms->atoms[j], nu));
      const Vec ja = spec.eval_dfdx(x, mu.atoms->atoms[j], nu);
      for (std::size_t e = 0; e < jac.size(); ++e) jac[e] += row[j] * ja[e];
    }
    Vec pnext(d, 0.0);
    for (int r = 0; r < d; ++r) {
      double jt = 0.0;
      for (int c = 0; c < d; ++c) jt += jac[static_cast<std::size_t>(c) * d + r] * p[c];
      pnext[r] = p[r] + dt * (dl[r] + jt);
    }
    p = std::move(pnext);
  }
  return grad;
}

double frob_diff(const std::vector<std::vector<double>>& a,
                 const std::vector<std::vector<double>>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t j = 0; j < a[k].size(); ++j) {
      const double d = a[k][j] - b[k][j];
      s += d * d;
    }
  return std::sqrt(s);
}

RelaxedControl apply_step(const RelaxedControl& mu, const std::vector<std::vector<double>>& grad,
                          double step, const ProblemSpec& spec) {
  RelaxedControl next = mu;
  for (int k = 0; k < mu.steps(); ++k) {
    std::vector<double> moved = mu.weights[k];
    for (std::size_t j = 0; j < moved.size(); ++j) moved[j] -= step * grad[k][j];
    next.weights[k] = project_to_simplex(moved);
  }
  return enforce_budget(next, spec.budget, spec.q);
}

}  // namespace

BestResponse best_response_grad(const Vec& x0, const FlowMeasure& m, const ProblemSpec& spec,
                                const RelaxedControl& init, const GradOptions& opt) {
  spec.validate();
  init.validate();
  RelaxedControl w = enforce_budget(init, spec.budget, spec.q);
  Path path = integrate_path(x0, w, m, spec, Scheme::Euler);
  double cost = path_cost(path, w, m, spec).total;

  int it = 0;
  double pg_norm = std::numeric_limits<double>::infinity();
  for (; it < opt.max_iters; ++it) {
    const auto grad = adjoint_gradient(path, w, m, spec);

    RelaxedControl base = apply_step(w, grad, opt.step, spec);
    pg_norm = frob_diff(w.weights, base.weights) / opt.step;
    if (pg_norm <= opt.grad_tol) break;

    double step = opt.step;
    RelaxedControl cand = std::move(base);
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      Path cand_path = integrate_path(x0, cand, m, spec, Scheme::Euler);
      const double cand_cost = path_cost(cand_path, cand, m, spec).total;
      if (cand_cost <= cost) {
        w = std::move(cand);
        path = std::move(cand_path);
        cost = cand_cost;
        accepted = true;
        break;
      }
      step *= 0.5;
      cand = apply_step(w, grad, step, spec);
    }
    if (!accepted) break;  // stationary to line-search resolution
  }

  BestResponse br;
  br.control = std::move(w);
  br.path = std::move(path);
  br.cost = cost;
  br.method = "grad";
  br.iterations = it;
  br.grad_norm = pg_norm;
  return br;
}

PathEnsemble best_response_measure(const FlowMeasure& m, const AtomicMeasure& m0,
                                   const ProblemSpec& spec, const SolverOptions& opt) {
  if (m0.size() == 0) throw std::invalid_argument("best_response_measure: empty initial law");
  PathEnsemble out;
  out.horizon = m.horizon;
  out.wrap = spec.wrap;
  out.weights = m0.weights;
  out.paths.resize(m0.size());
  out.controls.resize(m0.size());
  std::vector<std::string> errors(m0.size());

  // Per-atom responses are independent; the gather is index-ordered.
  if (opt.method == BrMethod::Dp) {
    DpTable table(m, spec, opt.dp);
    parallel_for(m0.size(), [&](std::size_t i) {
      try {
        BestResponse br = table.reconstruct(m0.support[i]);
        out.paths[i] = std::move(br.path);
        out.controls[i] = std::move(br.control);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
  } else {
    const auto atoms = spec.make_atoms();
    // Two standard starts (origin Dirac and uniform); the landscape over
    // weights is non-convex in general, keep the cheaper response.
    const RelaxedControl init_origin =
        RelaxedControl::constant_dirac(atoms, m.horizon, m.steps(), atoms->origin_index);
    std::vector<double> uniform_row(atoms->size(), 1.0 / atoms->size());
    double rs = 0.0;
    for (double v : uniform_row) rs += v;
    uniform_row.back() += 1.0 - rs;
    const RelaxedControl init_uniform =
        RelaxedControl::constant(atoms, m.horizon, m.steps(), uniform_row);
    parallel_for(m0.size(), [&](std::size_t i) {
      try {
        BestResponse br = best_response_grad(m0.support[i], m, spec, init_origin, opt.grad);
        BestResponse alt = best_response_grad(m0.support[i], m, spec, init_uniform, opt.grad);
        if (alt.cost < br.cost) br = std::move(alt);
        out.paths[i] = std::move(br.path);
        out.controls[i] = std::move(br.control);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error("best_response_measure: atom " + std::to_string(i) + ": " +
                               errors[i]);
  out.validate();
  return out;
}

EquilibriumResult fixed_point_iterate(const ProblemSpec& spec, const AtomicMeasure& m0,
                                      const FixedPointOptions& opt) {
  spec.validate();
  if (opt.damping <= 0.0 || opt.damping > 1.0)
    throw std::invalid_argument("fixed_point_iterate: damping must be in (0, 1]");

  const auto atoms = spec.make_atoms();
  const RelaxedControl mu0 =
      RelaxedControl::constant_dirac(atoms, spec.horizon, opt.steps, atoms->origin_index);

  // Bootstrap: origin-control ensemble against the frozen initial law.
  std::vector<EnsembleParticle> particles;
  particles.reserve(m0.size());
  for (std::size_t i = 0; i < m0.size(); ++i)
    particles.push_back({m0.support[i], mu0, m0.weights[i]});
  FlowMeasure m_target =
      empirical_flow(flow_ensemble(particles, constant_flow(m0, spec.horizon, opt.steps), spec));

  EquilibriumResult result;
  result.damping = opt.damping;

  for (int it = 1; it <= opt.max_iters; ++it) {
    PathEnsemble P = best_response_measure(m_target, m0, spec, opt.solver);
    FlowMeasure m_emp = empirical_flow(P);

    PathEnsemble P_check = best_response_measure(m_emp, m0, spec, opt.solver);
    const double consistency = flow_distance(m_emp, empirical_flow(P_check));
    const double optimality =
        ensemble_cost(m_emp, P, spec) - ensemble_cost(m_emp, P_check, spec);

    result.trace.push_back({it, consistency, optimality});
    result.ensemble = std::move(P);
    result.flow = std::move(m_emp);
    result.consistency_gap = consistency;
    result.optimality_gap = optimality;
    result.iterations = it;
    if (consistency <= opt.tol && optimality <= opt.tol) {
      result.converged = true;
      break;
    }
    m_target = mix_flows(m_target, result.flow, opt.damping, opt.prune_below);
  }
  return result;
}

CertifyReport certify(const PathEnsemble& ensemble, const AtomicMeasure& m0,
                      const ProblemSpec& spec, double tol, const SolverOptions& opt) {
  ensemble.validate();
  const FlowMeasure m = empirical_flow(ensemble);
  CertifyReport rep;
  rep.initial_gap = w1(m.nodes[0], m0);
  rep.support_residual = support_residual(ensemble, m, spec);
  const PathEnsemble br = best_response_measure(m, m0, spec, opt);
  rep.optimality_gap = ensemble_cost(m, ensemble, spec) - ensemble_cost(m, br, spec);
  rep.pass = rep.initial_gap <= tol && rep.support_residual <= tol && rep.optimality_gap <= tol;
  return rep;
}

}  // namespace mfc
