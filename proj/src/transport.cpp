#include "mfc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassEps = 1e-15;
}  // namespace

TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const std::function<double(std::size_t, std::size_t)>& cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (m == 0 || n == 0) throw std::invalid_argument("solve_transport: empty marginal");

  double total_a = 0.0, total_b = 0.0;
  for (double a : supply) {
    if (a < -kMassEps) throw std::invalid_argument("solve_transport: negative supply");
    total_a += a;
  }
  for (double b : demand) {
    if (b < -kMassEps) throw std::invalid_argument("solve_transport: negative demand");
    total_b += b;
  }
  if (std::abs(total_a - total_b) > 1e-9)
    throw std::invalid_argument("solve_transport: unbalanced marginals");

  // Dense cost matrix; evaluated once.
  std::vector<double> c(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double cij = cost(i, j);
      if (!(cij >= 0.0)) throw std::invalid_argument("solve_transport: negative or NaN cost");
      c[i * n + j] = cij;
    }

  std::vector<double> rem_supply = supply;
  std::vector<double> rem_demand = demand;
  std::vector<double> flow(m * n, 0.0);

  // Node layout: sources 0..m-1, sinks m..m+n-1.  pi keeps reduced
  // costs c_ij + pi_i - pi_j nonnegative across augmentations.
  const std::size_t nn = m + n;
  std::vector<double> pi(nn, 0.0);
  std::vector<double> dist(nn);
  std::vector<int> parent(nn);
  std::vector<char> done(nn);

  const std::size_t max_augment = 4 * m * n + 16;
  std::size_t augment = 0;
  while (true) {
    bool any_supply = false;
    for (std::size_t i = 0; i < m; ++i)
      if (rem_supply[i] > kMassEps) any_supply = true;
    if (!any_supply) break;
    if (++augment > max_augment) throw std::runtime_error("solve_transport: augmentation limit");

    // Multi-source Dijkstra over reduced costs.
    for (std::size_t v = 0; v < nn; ++v) {
      dist[v] = kInf;
      parent[v] = -1;
      done[v] = 0;
    }
    for (std::size_t i = 0; i < m; ++i)
      if (rem_supply[i] > kMassEps) dist[i] = 0.0;

    std::size_t best_sink = nn;
    while (true) {
      std::size_t u = nn;
      double du = kInf;
      for (std::size_t v = 0; v < nn; ++v)
        if (!done[v] && dist[v] < du) {
          du = dist[v];
          u = v;
        }
      if (u == nn) break;
      done[u] = 1;
      if (u >= m && rem_demand[u - m] > kMassEps) {
        best_sink = u;
        break;
      }
      if (u < m) {
        const std::size_t i = u;
        for (std::size_t j = 0; j < n; ++j) {
          double rc = c[i * n + j] + pi[i] - pi[m + j];
          if (rc < 0.0) rc = 0.0;  // floating round-off guard
          if (du + rc < dist[m + j]) {
            dist[m + j] = du + rc;
            parent[m + j] = static_cast<int>(i);
          }
        }
      } else {
        const std::size_t j = u - m;
        for (std::size_t i = 0; i < m; ++i) {
          if (flow[i * n + j] <= kMassEps) continue;
          double rc = -(c[i * n + j] + pi[i] - pi[m + j]);
          if (rc < 0.0) rc = 0.0;
          if (du + rc < dist[i]) {
            dist[i] = du + rc;
            parent[i] = static_cast<int>(m + j);
          }
        }
      }
    }
    if (best_sink == nn) throw std::runtime_error("solve_transport: no augmenting path");

    const double d_star = dist[best_sink];
    for (std::size_t v = 0; v < nn; ++v) pi[v] += std::min(dist[v], d_star);

    // Bottleneck along the path.
    double bottleneck = rem_demand[best_sink - m];
    for (std::size_t v = best_sink; parent[v] >= 0;) {
      const std::size_t p = static_cast<std::size_t>(parent[v]);
      if (v >= m)
        ;  // forward arc p -> v, infinite capacity
      else
        bottleneck = std::min(bottleneck, flow[v * n + (p - m)]);
      v = p;
      if (parent[v] < 0) bottleneck = std::min(bottleneck, rem_supply[v]);
    }

    for (std::size_t v = best_sink; parent[v] >= 0;) {
      const std::size_t p = static_cast<std::size_t>(parent[v]);
      if (v >= m)
        flow[p * n + (v - m)] += bottleneck;
      else
        flow[v * n + (p - m)] -= bottleneck;
      v = p;
      if (parent[v] < 0) rem_supply[v] -= bottleneck;
    }
    rem_demand[best_sink - m] -= bottleneck;
  }

  TransportResult out;
  out.flow = flow;
  double primal = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) primal += flow[i * n + j] * c[i * n + j];
  out.cost = primal;

  // Dual feasibility check: alpha_i = -pi_i, beta_j = pi_j - shift.
  double shift = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      shift = std::max(shift, (pi[m + j] - pi[i]) - c[i * n + j]);
  double dual = 0.0;
  for (std::size_t i = 0; i < m; ++i) dual -= supply[i] * pi[i];
  for (std::size_t j = 0; j < n; ++j) dual += demand[j] * (pi[m + j] - shift);
  out.dual_gap = primal - dual;
  return out;
}

}  // namespace mfc
