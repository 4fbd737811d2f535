#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mfc {

using Vec = std::vector<double>;

/// Canonical representative in [0, 1).
inline double wrap_unit(double z) {
  double r = z - std::floor(z);
  if (r >= 1.0) r = 0.0;  // guards tiny negative z rounding up to 1.0
  return r;
}

/// Signed displacement in [-0.5, 0.5).
inline double wrap_signed(double z) {
  double r = wrap_unit(z);
  return r >= 0.5 ? r - 1.0 : r;
}

/// Point on the flat torus [0,1)^d; coords are always canonical.
struct TorusPoint {
  Vec c;

  static TorusPoint normalized(Vec raw) {
    for (double& v : raw) v = wrap_unit(v);
    return TorusPoint{std::move(raw)};
  }

  std::size_t dim() const { return c.size(); }
};

/// Geodesic distance: per-coordinate min(|dz|, 1-|dz|), Euclidean combine.
inline double torus_dist(const TorusPoint& a, const TorusPoint& b) {
  if (a.c.size() != b.c.size()) throw std::invalid_argument("torus_dist: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.c.size(); ++i) {
    const double d = std::abs(wrap_signed(a.c[i] - b.c[i]));
    s += d * d;
  }
  return std::sqrt(s);
}

inline double torus_dist(const Vec& a, const Vec& b) {
  return torus_dist(TorusPoint{a}, TorusPoint{b});
}

// Small dense-vector helpers shared across the library.

inline double vec_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double vec_dist(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec_dist: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double vec_dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec vec_add(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vec vec_scale(Vec a, double s) {
  for (double& x : a) x *= s;
  return a;
}

/// a += s * b
inline void vec_axpy(Vec& a, double s, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

inline double vec_max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace mfc
