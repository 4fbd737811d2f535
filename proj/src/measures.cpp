#include "mfc/measures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfc/transport.hpp"

namespace mfc {

namespace {
constexpr double kMassTol = 1e-12;
constexpr double kMergeTol = 1e-12;
}  // namespace

AtomicMeasure AtomicMeasure::create(Domain domain, std::vector<Vec> support,
                                    std::vector<double> weights) {
  if (support.empty() || support.size() != weights.size())
    throw std::invalid_argument("AtomicMeasure: support/weights size mismatch or empty");
  const std::size_t d = support[0].size();
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i].size() != d) throw std::invalid_argument("AtomicMeasure: ragged support");
    if (weights[i] < 0.0) throw std::invalid_argument("AtomicMeasure: negative weight");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > kMassTol)
    throw std::invalid_argument("AtomicMeasure: weights must sum to 1");
  if (domain == Domain::Torus)
    for (Vec& p : support)
      for (double& v : p) v = wrap_unit(v);
  return AtomicMeasure{domain, std::move(support), std::move(weights)};
}

AtomicMeasure AtomicMeasure::dirac(Domain domain, Vec point) {
  return create(domain, {std::move(point)}, {1.0});
}

double ground_dist(Domain domain, const Vec& a, const Vec& b) {
  return domain == Domain::Torus ? torus_dist(a, b) : vec_dist(a, b);
}

namespace {

bool same_point(Domain domain, const Vec& a, const Vec& b) {
  if (domain == Domain::Torus) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(wrap_signed(a[i] - b[i])) > kMergeTol) return false;
    return true;
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > kMergeTol) return false;
  return true;
}

}  // namespace

AtomicMeasure merge_atoms(const AtomicMeasure& m) {
  std::vector<Vec> support;
  std::vector<double> weights;
  support.reserve(m.size());
  weights.reserve(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    bool merged = false;
    for (std::size_t k = 0; k < support.size(); ++k) {
      if (same_point(m.domain, support[k], m.support[i])) {
        weights[k] += m.weights[i];
        merged = true;
        break;
      }
    }
    if (!merged) {
      support.push_back(m.support[i]);
      weights.push_back(m.weights[i]);
    }
  }
  return AtomicMeasure{m.domain, std::move(support), std::move(weights)};
}

AtomicMeasure pushforward(const AtomicMeasure& m, const std::function<Vec(const Vec&)>& map) {
  std::vector<Vec> mapped;
  mapped.reserve(m.size());
  for (const Vec& p : m.support) {
    Vec q = map(p);
    if (m.domain == Domain::Torus)
      for (double& v : q) v = wrap_unit(v);
    mapped.push_back(std::move(q));
  }
  return merge_atoms(AtomicMeasure{m.domain, std::move(mapped), m.weights});
}

double w1_lp(const AtomicMeasure& a, const AtomicMeasure& b) {
  if (a.domain != b.domain) throw std::invalid_argument("w1: mixed domain tags");
  if (a.dim() != b.dim()) throw std::invalid_argument("w1: dimension mismatch");
  auto res = solve_transport(a.weights, b.weights, [&](std::size_t i, std::size_t j) {
    return ground_dist(a.domain, a.support[i], b.support[j]);
  });
  if (std::abs(res.dual_gap) > 1e-9 * (1.0 + std::abs(res.cost)))
    throw std::runtime_error("w1_lp: duality gap check failed");
  return res.cost;
}

namespace {

struct Jump {
  double pos;
  double delta;  // CDF-difference jump (+ for first measure, - for second)
};

/// min over theta of sum len_k |D_k - theta|, the weighted median value.
double shifted_l1(std::vector<double> lens, std::vector<double> vals) {
  std::vector<std::size_t> idx(vals.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) {
    if (vals[p] != vals[q]) return vals[p] < vals[q];
    return p < q;
  });
  double total = 0.0;
  for (double l : lens) total += l;
  double acc = 0.0;
  double theta = vals[idx.back()];
  for (std::size_t r = 0; r < idx.size(); ++r) {
    acc += lens[idx[r]];
    if (acc >= 0.5 * total) {
      theta = vals[idx[r]];
      break;
    }
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) cost += lens[i] * std::abs(vals[i] - theta);
  return cost;
}

}  // namespace

double w1_closed_form_1d(const AtomicMeasure& a, const AtomicMeasure& b) {
  if (a.domain != b.domain) throw std::invalid_argument("w1: mixed domain tags");
  if (a.dim() != 1 || b.dim() != 1)
    throw std::invalid_argument("w1_closed_form_1d: requires dimension 1");

  std::vector<Jump> jumps;
  jumps.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) jumps.push_back({a.support[i][0], a.weights[i]});
  for (std::size_t j = 0; j < b.size(); ++j) jumps.push_back({b.support[j][0], -b.weights[j]});
  std::stable_sort(jumps.begin(), jumps.end(),
                   [](const Jump& p, const Jump& q) { return p.pos < q.pos; });

  // Segment values of D(x) = F_a(x) - F_b(x) between consecutive jump points.
  std::vector<double> lens, vals;
  lens.reserve(jumps.size());
  vals.reserve(jumps.size());
  double d = 0.0;
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    d += jumps[k].delta;
    std::size_t k2 = k;
    while (k2 + 1 < jumps.size() && jumps[k2 + 1].pos == jumps[k].pos) {
      ++k2;
      d += jumps[k2].delta;
    }
    double next;
    if (a.domain == Domain::Torus)
      next = (k2 + 1 < jumps.size()) ? jumps[k2 + 1].pos : jumps.front().pos + 1.0;
    else
      next = (k2 + 1 < jumps.size()) ? jumps[k2 + 1].pos : jumps[k2].pos;
    lens.push_back(next - jumps[k2].pos);
    vals.push_back(d);
    k = k2;
  }

  if (a.domain == Domain::Torus) return shifted_l1(std::move(lens), std::move(vals));
  // Real line: no shift freedom, plain CDF-difference area.
  double cost = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) cost += lens[i] * std::abs(vals[i]);
  return cost;
}

double w1(const AtomicMeasure& a, const AtomicMeasure& b) {
  if (a.domain != b.domain) throw std::invalid_argument("w1: mixed domain tags");
  if (a.dim() != b.dim()) throw std::invalid_argument("w1: dimension mismatch");
  if (a.dim() == 1) return w1_closed_form_1d(a, b);
  return w1_lp(a, b);
}

double JointMeasure::total_mass() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

int FeedbackControl::t_bin_of(double t) const {
  int b = static_cast<int>(std::floor(t / horizon * t_bins));
  return std::clamp(b, 0, t_bins - 1);
}

int FeedbackControl::x_bin_of(const Vec& x) const {
  int flat = 0;
  for (int a = 0; a < x_dim; ++a) {
    int b = static_cast<int>(std::floor(wrap_unit(x[a]) * x_bins));
    b = std::clamp(b, 0, x_bins - 1);
    flat = flat * x_bins + b;
  }
  return flat;
}

namespace {

/// Wrapped distance between flattened x-bin indices, coordinate-wise.
int x_bin_distance(int xa, int xb, int x_bins, int x_dim) {
  int dist = 0;
  for (int a = 0; a < x_dim; ++a) {
    const int ca = xa % x_bins;
    const int cb = xb % x_bins;
    xa /= x_bins;
    xb /= x_bins;
    const int d = std::abs(ca - cb);
    dist += std::min(d, x_bins - d);
  }
  return dist;
}

}  // namespace

FeedbackControl disintegrate(const JointMeasure& eta, int t_bins, int x_bins) {
  if (t_bins < 1 || x_bins < 1) throw std::invalid_argument("disintegrate: bins must be >= 1");
  if (eta.atoms.size() != eta.weights.size())
    throw std::invalid_argument("disintegrate: atoms/weights size mismatch");
  if (eta.total_mass() <= 0.0) throw std::invalid_argument("disintegrate: zero-mass measure");

  FeedbackControl fb;
  fb.horizon = eta.horizon;
  fb.t_bins = t_bins;
  fb.x_bins = x_bins;
  fb.x_dim = eta.x_dim;

  // Deduplicated control atom list, first-occurrence order.
  std::vector<int> atom_of(eta.atoms.size());
  for (std::size_t i = 0; i < eta.atoms.size(); ++i) {
    int found = -1;
    for (std::size_t k = 0; k < fb.atoms.size(); ++k)
      if (vec_max_abs_diff(fb.atoms[k], eta.atoms[i].u) <= kMergeTol) {
        found = static_cast<int>(k);
        break;
      }
    if (found < 0) {
      fb.atoms.push_back(eta.atoms[i].u);
      found = static_cast<int>(fb.atoms.size()) - 1;
    }
    atom_of[i] = found;
  }

  const int n_cells = t_bins * fb.x_cells();
  const std::size_t n_atoms = fb.atoms.size();
  fb.cells.assign(n_cells, FeedbackControl::Cell{});
  for (auto& c : fb.cells) c.raw.assign(n_atoms, 0.0);

  for (std::size_t i = 0; i < eta.atoms.size(); ++i) {
    const int tb = fb.t_bin_of(eta.atoms[i].t);
    const int xb = fb.x_bin_of(eta.atoms[i].x);
    fb.cell(tb, xb).raw[atom_of[i]] += eta.weights[i];
  }

  std::vector<int> nonempty;
  for (int c = 0; c < n_cells; ++c) {
    auto& cell = fb.cells[c];
    cell.mass = 0.0;
    for (double w : cell.raw) cell.mass += w;
    if (cell.mass > 0.0) {
      cell.probs.resize(n_atoms);
      for (std::size_t j = 0; j < n_atoms; ++j) cell.probs[j] = cell.raw[j] / cell.mass;
      nonempty.push_back(c);
    }
  }
  if (nonempty.empty()) throw std::invalid_argument("disintegrate: zero-mass measure");

  const int xc = fb.x_cells();
  for (int c = 0; c < n_cells; ++c) {
    if (fb.cells[c].mass > 0.0) continue;
    const int tb = c / xc, xb = c % xc;
    int best = -1, best_dist = 0;
    for (int s : nonempty) {
      const int dist = std::abs(s / xc - tb) + x_bin_distance(s % xc, xb, x_bins, fb.x_dim);
      if (best < 0 || dist < best_dist) {  // scan order breaks ties toward smaller index
        best = s;
        best_dist = dist;
      }
    }
    fb.cells[c].probs = fb.cells[best].probs;
    fb.cells[c].filled_from_neighbor = true;
  }
  return fb;
}

}  // namespace mfc
