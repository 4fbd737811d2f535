#include "mfc/control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mfc/measures.hpp"
#include "mfc/transport.hpp"

namespace mfc {

namespace {
constexpr double kRowTol = 1e-12;
}

RelaxedControl RelaxedControl::constant(std::shared_ptr<const ControlAtoms> atoms, double horizon,
                                        int steps, const std::vector<double>& row) {
  if (!atoms || steps < 1 || horizon <= 0.0)
    throw std::invalid_argument("RelaxedControl: bad grid");
  if (row.size() != atoms->size())
    throw std::invalid_argument("RelaxedControl: row length mismatch");
  RelaxedControl mu;
  mu.atoms = std::move(atoms);
  mu.horizon = horizon;
  mu.weights.assign(steps, row);
  mu.validate();
  return mu;
}

RelaxedControl RelaxedControl::constant_dirac(std::shared_ptr<const ControlAtoms> atoms,
                                              double horizon, int steps, std::size_t atom_index) {
  if (!atoms || atom_index >= atoms->size())
    throw std::invalid_argument("RelaxedControl: bad atom index");
  std::vector<double> row(atoms->size(), 0.0);
  row[atom_index] = 1.0;
  return constant(std::move(atoms), horizon, steps, row);
}

void RelaxedControl::validate() const {
  if (!atoms) throw std::invalid_argument("RelaxedControl: missing atom set");
  if (weights.empty()) throw std::invalid_argument("RelaxedControl: empty grid");
  for (const auto& row : weights) {
    if (row.size() != atoms->size())
      throw std::invalid_argument("RelaxedControl: row length mismatch");
    double total = 0.0;
    for (double w : row) {
      if (w < -kRowTol) throw std::invalid_argument("RelaxedControl: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > kRowTol)
      throw std::invalid_argument("RelaxedControl: row must sum to 1");
  }
}

double moment(const RelaxedControl& mu, double s) {
  if (s < 1.0) throw std::invalid_argument("moment: order must be >= 1");
  const double dt = mu.dt();
  // |u_j|^s is shared across rows; hoist it.
  std::vector<double> pw(mu.atoms->size());
  for (std::size_t j = 0; j < pw.size(); ++j) pw[j] = std::pow(vec_norm(mu.atoms->atoms[j]), s);
  double total = 0.0;
  for (const auto& row : mu.weights) {
    double rowsum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) rowsum += row[j] * pw[j];
    total += dt * rowsum;
  }
  return total;
}

RelaxedControl enforce_budget(const RelaxedControl& mu, double budget, double q) {
  const double mq = moment(mu, q);
  // round-off slack keeps the projection exactly idempotent
  if (mq <= budget * (1.0 + 1e-12) + 1e-300) return mu;
  // moment is linear in the weights and vanishes on the origin Dirac,
  // so mixing with ratio theta lands exactly on the budget surface.
  const double theta = 1.0 - budget / mq;
  RelaxedControl out = mu;
  const std::size_t o = mu.atoms->origin_index;
  for (auto& row : out.weights) {
    for (double& w : row) w *= (1.0 - theta);
    row[o] += theta;
  }
  // compensate accumulated round-off so rows stay inside the 1e-12 gate
  for (auto& row : out.weights) {
    double s = 0.0;
    for (double w : row) s += w;
    row[o] += 1.0 - s;
  }
  out.validate();
  return out;
}

double control_distance(const RelaxedControl& a, const RelaxedControl& b) {
  if (a.atoms.get() != b.atoms.get() && a.atoms->atoms != b.atoms->atoms)
    throw std::invalid_argument("control_distance: controls must share the atom set");
  if (a.steps() != b.steps() || a.horizon != b.horizon)
    throw std::invalid_argument("control_distance: time grid mismatch");

  const int n_steps = a.steps();
  const std::size_t m = a.atoms->size();
  const double dt = a.dt();
  const double scale = dt / a.horizon;  // normalized measures on [0,T] x R^n

  std::vector<double> wa, wb;
  std::vector<std::pair<double, std::size_t>> atoms_idx;  // (t_k, atom j)
  wa.reserve(n_steps * m);
  wb.reserve(n_steps * m);
  for (int k = 0; k < n_steps; ++k)
    for (std::size_t j = 0; j < m; ++j) {
      atoms_idx.emplace_back(k * dt, j);
      wa.push_back(a.weights[k][j] * scale);
      wb.push_back(b.weights[k][j] * scale);
    }
  auto res = solve_transport(wa, wb, [&](std::size_t i, std::size_t j) {
    const auto& [ti, ai] = atoms_idx[i];
    const auto& [tj, aj] = atoms_idx[j];
    return std::abs(ti - tj) + vec_dist(a.atoms->atoms[ai], a.atoms->atoms[aj]);
  });
  return res.cost;
}

RelaxedControl dirac_control(std::shared_ptr<const ControlAtoms> atoms, double horizon,
                             const std::vector<Vec>& values) {
  if (!atoms || values.empty()) throw std::invalid_argument("dirac_control: empty input");
  RelaxedControl mu;
  mu.horizon = horizon;
  mu.weights.reserve(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const int j = atoms->find(values[k]);
    if (j < 0)
      throw std::invalid_argument("dirac_control: value at step " + std::to_string(k) +
                                  " is not a control atom");
    std::vector<double> row(atoms->size(), 0.0);
    row[static_cast<std::size_t>(j)] = 1.0;
    mu.weights.push_back(std::move(row));
  }
  mu.atoms = std::move(atoms);
  mu.validate();
  return mu;
}

std::vector<double> project_to_simplex(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n == 0) throw std::invalid_argument("project_to_simplex: empty vector");
  std::vector<double> sorted(v);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double running = 0.0;
  double theta = sorted[0] - 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    running += sorted[k];
    const double candidate = (running - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0)
      theta = candidate;
    else
      break;
  }
  std::vector<double> out(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::max(v[i] - theta, 0.0);
    total += out[i];
  }
  // renormalize round-off; lowest index absorbs the slack (deterministic)
  if (total > 0.0) {
    for (double& w : out) w /= total;
    double s = 0.0;
    for (double w : out) s += w;
    out[0] += 1.0 - s;
  } else {
    out.assign(n, 0.0);
    out[0] = 1.0;
  }
  return out;
}

}  // namespace mfc
