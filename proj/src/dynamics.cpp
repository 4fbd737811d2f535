#include "mfc/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace mfc {

void PathEnsemble::validate() const {
  if (paths.size() != weights.size() || paths.size() != controls.size() || paths.empty())
    throw std::invalid_argument("PathEnsemble: inconsistent sizes");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("PathEnsemble: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("PathEnsemble: weights must sum to 1");
  for (const auto& p : paths)
    if (p.steps() != steps() || p.horizon != horizon)
      throw std::invalid_argument("PathEnsemble: grid mismatch across paths");
}

Vec averaged_drift(const Vec& x, const std::vector<double>& row, const ControlAtoms& atoms,
                   const AtomicMeasure& nu, const ProblemSpec& spec) {
  Vec v(spec.dim, 0.0);
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] == 0.0) continue;
    vec_axpy(v, row[j], spec.f(x, atoms.atoms[j], nu));
  }
  return v;
}

Path integrate_steps(const Vec& x0, const std::function<Vec(int, const Vec&)>& drift,
                     double horizon, int steps, bool wrap) {
  if (steps < 1 || horizon <= 0.0) throw std::invalid_argument("integrate_steps: bad grid");
  const double dt = horizon / steps;
  Path path;
  path.horizon = horizon;
  path.wrap = wrap;
  path.positions.reserve(steps + 1);
  path.increments.reserve(steps);

  Vec x = x0;
  if (wrap)
    for (double& c : x) c = wrap_unit(c);
  path.positions.push_back(x);

  for (int k = 0; k < steps; ++k) {
    Vec inc = vec_scale(drift(k, x), dt);
    for (double v : inc)
      if (!std::isfinite(v))
        throw std::runtime_error("integrate_steps: non-finite drift at step " + std::to_string(k));
    Vec next = vec_add(x, inc);
    if (wrap)
      for (double& c : next) c = wrap_unit(c);
    path.increments.push_back(std::move(inc));
    path.positions.push_back(next);
    x = std::move(next);
  }
  return path;
}

Path integrate_path(const Vec& x0, const RelaxedControl& mu, const FlowMeasure& m,
                    const ProblemSpec& spec, Scheme scheme) {
  if (mu.steps() != m.steps() || mu.horizon != m.horizon)
    throw std::invalid_argument("integrate_path: control/flow grid mismatch");
  if (x0.size() != static_cast<std::size_t>(spec.dim))
    throw std::invalid_argument("integrate_path: bad initial point");

  const int n = mu.steps();
  const double dt = mu.dt();

  if (scheme == Scheme::Euler) {
    return integrate_steps(
        x0,
        [&](int k, const Vec& x) {
          return averaged_drift(x, mu.weights[k], *mu.atoms, m.at_step(k), spec);
        },
        mu.horizon, n, spec.wrap);
  }

  Path path;
  path.horizon = mu.horizon;
  path.wrap = spec.wrap;
  path.positions.reserve(n + 1);
  path.increments.reserve(n);

  Vec x = x0;
  if (spec.wrap)
    for (double& c : x) c = wrap_unit(c);
  path.positions.push_back(x);

  for (int k = 0; k < n; ++k) {
    const auto& row = mu.weights[k];
    const AtomicMeasure& nu = m.at_step(k);
    const Vec k1 = averaged_drift(x, row, *mu.atoms, nu, spec);
    Vec x2 = x;
    vec_axpy(x2, 0.5 * dt, k1);
    const Vec k2 = averaged_drift(x2, row, *mu.atoms, nu, spec);
    Vec x3 = x;
    vec_axpy(x3, 0.5 * dt, k2);
    const Vec k3 = averaged_drift(x3, row, *mu.atoms, nu, spec);
    Vec x4 = x;
    vec_axpy(x4, dt, k3);
    const Vec k4 = averaged_drift(x4, row, *mu.atoms, nu, spec);
    Vec inc(spec.dim, 0.0);
    for (int c = 0; c < spec.dim; ++c)
      inc[c] = dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    for (double v : inc)
      if (!std::isfinite(v))
        throw std::runtime_error("integrate_path: non-finite drift at step " + std::to_string(k));
    Vec next = vec_add(x, inc);
    if (spec.wrap)
      for (double& c : next) c = wrap_unit(c);
    path.increments.push_back(std::move(inc));
    path.positions.push_back(next);
    x = std::move(next);
  }
  return path;
}

PathEnsemble flow_ensemble(const std::vector<EnsembleParticle>& particles, const FlowMeasure& m,
                           const ProblemSpec& spec, Scheme scheme) {
  if (particles.empty()) throw std::invalid_argument("flow_ensemble: no particles");
  PathEnsemble out;
  out.horizon = m.horizon;
  out.wrap = spec.wrap;
  out.weights.reserve(particles.size());
  out.paths.reserve(particles.size());
  out.controls.reserve(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    try {
      out.paths.push_back(integrate_path(particles[i].x0, particles[i].control, m, spec, scheme));
    } catch (const std::exception& e) {
      throw std::runtime_error("flow_ensemble: particle " + std::to_string(i) + ": " + e.what());
    }
    out.controls.push_back(particles[i].control);
    out.weights.push_back(particles[i].weight);
  }
  out.validate();
  return out;
}

FlowMeasure empirical_flow(const PathEnsemble& ensemble) {
  ensemble.validate();
  FlowMeasure flow;
  flow.horizon = ensemble.horizon;
  const int n = ensemble.steps();
  const Domain dom = ensemble.wrap ? Domain::Torus : Domain::Control;
  flow.nodes.reserve(n + 1);
  for (int k = 0; k <= n; ++k) {
    std::vector<Vec> support;
    support.reserve(ensemble.size());
    for (const auto& p : ensemble.paths) support.push_back(p.positions[k]);
    flow.nodes.push_back(
        merge_atoms(AtomicMeasure::create(dom, std::move(support), ensemble.weights)));
  }
  return flow;
}

double velocity_budget(const Path& path, const ProblemSpec& spec) {
  const double e = spec.q / spec.p;
  const double dt = path.dt();
  double total = 0.0;
  for (const Vec& inc : path.increments) total += dt * std::pow(vec_norm(inc) / dt, e);
  return std::pow(total, 1.0 / e);
}

HolderReport check_holder(const FlowMeasure& m, double K, double r) {
  HolderReport rep;
  const int n = m.steps();
  const double dt = m.dt();
  for (int i = 0; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      const double bound = K * std::pow((j - i) * dt, 1.0 / r);
      const double d = w1(m.nodes[i], m.nodes[j]);
      const double ratio = bound > 0.0 ? d / bound : (d > 0.0 ? 1e300 : 0.0);
      if (ratio > rep.max_ratio) {
        rep.max_ratio = ratio;
        rep.arg_i = i;
        rep.arg_j = j;
      }
    }
  rep.pass = rep.max_ratio <= 1.0 + 1e-6;
  return rep;
}

double support_residual(const PathEnsemble& ensemble, const FlowMeasure& m,
                        const ProblemSpec& spec) {
  if (ensemble.steps() != m.steps() || ensemble.horizon != m.horizon)
    throw std::invalid_argument("support_residual: grid mismatch");
  const int n = ensemble.steps();
  const double dt = m.dt();
  double worst = 0.0;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const Path& path = ensemble.paths[i];
    const RelaxedControl& mu = ensemble.controls[i];
    Vec err(spec.dim, 0.0);
    for (int k = 0; k < n; ++k) {
      const Vec drift =
          averaged_drift(path.positions[k], mu.weights[k], *mu.atoms, m.at_step(k), spec);
      for (int c = 0; c < spec.dim; ++c) err[c] += path.increments[k][c] - dt * drift[c];
      worst = std::max(worst, vec_norm(err));
    }
  }
  return worst;
}

FlowMeasure constant_flow(const AtomicMeasure& m0, double horizon, int steps) {
  if (steps < 1 || horizon <= 0.0) throw std::invalid_argument("constant_flow: bad grid");
  FlowMeasure flow;
  flow.horizon = horizon;
  flow.nodes.assign(steps + 1, m0);
  return flow;
}

FlowMeasure mix_flows(const FlowMeasure& a, const FlowMeasure& b, double lambda,
                      double prune_below) {
  if (a.steps() != b.steps() || a.horizon != b.horizon)
    throw std::invalid_argument("mix_flows: grid mismatch");
  FlowMeasure out;
  out.horizon = a.horizon;
  out.nodes.reserve(a.nodes.size());
  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    const auto& na = a.nodes[k];
    const auto& nb = b.nodes[k];
    std::vector<Vec> support = na.support;
    std::vector<double> weights;
    weights.reserve(na.size() + nb.size());
    for (double w : na.weights) weights.push_back((1.0 - lambda) * w);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      support.push_back(nb.support[i]);
      weights.push_back(lambda * nb.weights[i]);
    }
    AtomicMeasure merged =
        merge_atoms(AtomicMeasure{na.domain, std::move(support), std::move(weights)});
    std::vector<Vec> kept_s;
    std::vector<double> kept_w;
    bool pruned = false;
    for (std::size_t i = 0; i < merged.size(); ++i) {
      if (merged.weights[i] < prune_below) {
        pruned = true;
        continue;
      }
      kept_s.push_back(merged.support[i]);
      kept_w.push_back(merged.weights[i]);
    }
    if (pruned) {
      double total = 0.0;
      for (double w : kept_w) total += w;
      for (double& w : kept_w) w /= total;
    }
    out.nodes.push_back(AtomicMeasure::create(merged.domain, std::move(kept_s), std::move(kept_w)));
  }
  return out;
}

double flow_distance(const FlowMeasure& a, const FlowMeasure& b) {
  if (a.steps() != b.steps() || a.horizon != b.horizon)
    throw std::invalid_argument("flow_distance: grid mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.nodes.size(); ++k)
    worst = std::max(worst, w1(a.nodes[k], b.nodes[k]));
  return worst;
}

}  // namespace mfc
