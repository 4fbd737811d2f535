#include "mfc/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mfc/expr.hpp"

namespace mfc {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kFdStep = 1e-6;

/// Smooth periodic well: s(0) = 0, maximum 1 at the antipode,
/// s(z) ~ pi^2 z^2 near 0.
double smooth_well(double z) { return 0.5 * (1.0 - std::cos(2.0 * kPi * z)); }
double smooth_well_dz(double z) { return kPi * std::sin(2.0 * kPi * z); }

}  // namespace

std::shared_ptr<const ControlAtoms> ControlAtoms::make(std::vector<Vec> atoms) {
  if (atoms.empty()) throw std::invalid_argument("ControlAtoms: empty atom set");
  const std::size_t n = atoms[0].size();
  int origin = -1;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].size() != n) throw std::invalid_argument("ControlAtoms: ragged atoms");
    for (std::size_t k = i + 1; k < atoms.size(); ++k)
      if (vec_max_abs_diff(atoms[i], atoms[k]) <= 1e-12)
        throw std::invalid_argument("ControlAtoms: duplicate atoms");
    if (vec_norm(atoms[i]) <= 1e-12) origin = static_cast<int>(i);
  }
  if (origin < 0) throw std::invalid_argument("ControlAtoms: origin atom required");
  auto out = std::make_shared<ControlAtoms>();
  out->atoms = std::move(atoms);
  out->origin_index = static_cast<std::size_t>(origin);
  return out;
}

std::shared_ptr<const ControlAtoms> ControlAtoms::from_box(const Vec& lo, const Vec& hi,
                                                           int per_axis) {
  if (lo.size() != hi.size() || lo.empty())
    throw std::invalid_argument("ControlAtoms: bad box");
  if (per_axis < 1) throw std::invalid_argument("ControlAtoms: per_axis must be >= 1");
  const std::size_t n = lo.size();
  for (std::size_t a = 0; a < n; ++a)
    if (lo[a] > 0.0 || hi[a] < 0.0 || lo[a] >= hi[a])
      throw std::invalid_argument("ControlAtoms: box must contain the origin");

  std::vector<std::vector<double>> axis_vals(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> vals;
    if (per_axis == 1) {
      vals.push_back(0.0);
    } else {
      for (int i = 0; i < per_axis; ++i)
        vals.push_back(lo[a] + (hi[a] - lo[a]) * i / (per_axis - 1));
      // snap the lattice point closest to 0 onto the origin exactly
      std::size_t best = 0;
      for (std::size_t i = 1; i < vals.size(); ++i)
        if (std::abs(vals[i]) < std::abs(vals[best])) best = i;
      vals[best] = 0.0;
    }
    axis_vals[a] = std::move(vals);
  }

  std::vector<Vec> atoms;
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    Vec u(n);
    for (std::size_t a = 0; a < n; ++a) u[a] = axis_vals[a][idx[a]];
    atoms.push_back(std::move(u));
    std::size_t a = n;
    while (a > 0) {
      --a;
      if (++idx[a] < axis_vals[a].size()) break;
      idx[a] = 0;
      if (a == 0) return make(std::move(atoms));
    }
  }
}

int ControlAtoms::find(const Vec& u) const {
  for (std::size_t i = 0; i < atoms.size(); ++i)
    if (vec_max_abs_diff(atoms[i], u) <= 1e-12) return static_cast<int>(i);
  return -1;
}

std::shared_ptr<const ControlAtoms> ProblemSpec::make_atoms() const {
  return ControlAtoms::from_box(box_lo, box_hi, atoms_per_axis);
}

void ProblemSpec::validate() const {
  if (dim < 1 || control_dim < 1) throw std::invalid_argument("ProblemSpec: bad dimensions");
  if (horizon <= 0.0) throw std::invalid_argument("ProblemSpec: horizon must be positive");
  if (!(q > p) || p < 1.0) throw std::invalid_argument("ProblemSpec: need q > p >= 1");
  if (budget <= 0.0) throw std::invalid_argument("ProblemSpec: budget must be positive");
  if (!f || !L) throw std::invalid_argument("ProblemSpec: f and L are required");
  if (box_lo.size() != static_cast<std::size_t>(control_dim) ||
      box_hi.size() != static_cast<std::size_t>(control_dim))
    throw std::invalid_argument("ProblemSpec: box dimension mismatch");
}

double ProblemSpec::state_dist(const Vec& a, const Vec& b) const {
  return wrap ? torus_dist(a, b) : vec_dist(a, b);
}

Vec ProblemSpec::eval_dLdx(const Vec& x, const Vec& u, const AtomicMeasure& nu) const {
  if (dLdx) return dLdx(x, u, nu);
  Vec g(dim);
  for (int c = 0; c < dim; ++c) {
    Vec xp = x, xm = x;
    xp[c] += kFdStep;
    xm[c] -= kFdStep;
    if (wrap) {
      xp[c] = wrap_unit(xp[c]);
      xm[c] = wrap_unit(xm[c]);
    }
    g[c] = (L(xp, u, nu) - L(xm, u, nu)) / (2.0 * kFdStep);
  }
  return g;
}

Vec ProblemSpec::eval_dfdx(const Vec& x, const Vec& u, const AtomicMeasure& nu) const {
  if (dfdx) return dfdx(x, u, nu);
  Vec jac(static_cast<std::size_t>(dim) * dim);
  for (int c = 0; c < dim; ++c) {
    Vec xp = x, xm = x;
    xp[c] += kFdStep;
    xm[c] -= kFdStep;
    if (wrap) {
      xp[c] = wrap_unit(xp[c]);
      xm[c] = wrap_unit(xm[c]);
    }
    const Vec fp = f(xp, u, nu);
    const Vec fm = f(xm, u, nu);
    for (int r = 0; r < dim; ++r)
      jac[static_cast<std::size_t>(r) * dim + c] = (fp[r] - fm[r]) / (2.0 * kFdStep);
  }
  return jac;
}

Vec ProblemSpec::eval_dg(const Vec& x) const {
  if (!g) return Vec(dim, 0.0);
  if (dg) return dg(x);
  Vec grad(dim);
  for (int c = 0; c < dim; ++c) {
    Vec xp = x, xm = x;
    xp[c] += kFdStep;
    xm[c] -= kFdStep;
    grad[c] = (g(xp) - g(xm)) / (2.0 * kFdStep);
  }
  return grad;
}

DerivedConstants derive_constants(const ProblemSpec& spec) {
  DerivedConstants out;
  const double e = spec.q / spec.p;
  const double pref = std::pow(2.0, e - 1.0) * std::pow(spec.C, e);
  out.K = std::pow(pref * spec.horizon + pref * spec.budget, 1.0 / e);
  out.r = spec.q / (spec.q - spec.p);
  out.moment_p_bound = std::pow(spec.budget, spec.p / spec.q) * std::pow(spec.horizon, 1.0 / out.r);
  return out;
}

bool BoundsReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

AtomicMeasure random_atomic_torus(int dim, std::size_t max_atoms, Rng& rng) {
  const std::size_t n = 1 + rng.index(max_atoms);
  std::vector<Vec> support(n);
  std::vector<double> weights(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec p(dim);
    for (int c = 0; c < dim; ++c) p[c] = rng.uniform();
    support[i] = std::move(p);
    weights[i] = -std::log(1.0 - rng.uniform());  // Exp(1), Dirichlet via normalization
    total += weights[i];
  }
  for (double& w : weights) w /= total;
  // renormalize exactly into the 1e-12 gate
  double s = 0.0;
  for (double w : weights) s += w;
  weights.back() += 1.0 - s;
  if (weights.back() < 0.0) weights.back() = 0.0;
  return AtomicMeasure::create(Domain::Torus, std::move(support), std::move(weights));
}

std::vector<double> random_stochastic_row(std::size_t m, Rng& rng) {
  std::vector<double> row(m);
  double total = 0.0;
  for (double& v : row) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (double& v : row) v /= total;
  double s = 0.0;
  for (double v : row) s += v;
  row.back() += 1.0 - s;
  if (row.back() < 0.0) row.back() = 0.0;
  return row;
}

Vec random_box_point(const Vec& lo, const Vec& hi, Rng& rng) {
  Vec u(lo.size());
  for (std::size_t a = 0; a < lo.size(); ++a) u[a] = rng.uniform(lo[a], hi[a]);
  return u;
}

namespace {

struct RatioTracker {
  double worst = 0.0;
  int violations = 0;
  std::string witness;

  void record(double observed, double allowed, double hard_floor, const std::string& where) {
    // allowed == 0 bounds are treated as "observed must vanish".
    const double denom = std::max(allowed, hard_floor);
    const double ratio = observed / denom;
    if (ratio > worst) {
      worst = ratio;
      witness = where;
    }
    if (observed > allowed * (1.0 + 1e-9) + 1e-12) ++violations;
  }

  AssumptionCheck finish(std::string name) const {
    AssumptionCheck c;
    c.name = std::move(name);
    c.pass = violations == 0;
    c.worst_ratio = worst;
    c.violations = violations;
    c.witness = witness;
    return c;
  }
};

std::string describe_sample(const Vec& x, const Vec& u) {
  std::ostringstream os;
  os << "x=(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << ") u=(";
  for (std::size_t i = 0; i < u.size(); ++i) os << (i ? "," : "") << u[i];
  os << ")";
  return os.str();
}

double checked(double v, const char* assumption) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("evaluator failure while checking ") + assumption);
  return v;
}

}  // namespace

BoundsReport validate_assumptions(const ProblemSpec& spec, int samples, std::uint64_t seed) {
  spec.validate();
  if (samples < 1) throw std::invalid_argument("validate_assumptions: samples must be >= 1");
  Rng rng(seed);

  RatioTracker f_growth, l_growth, dl_growth, lip_x, lip_nu, l2;

  for (int s = 0; s < samples; ++s) {
    Vec x(spec.dim), x2(spec.dim);
    for (int c = 0; c < spec.dim; ++c) {
      x[c] = rng.uniform();
      x2[c] = rng.uniform();
    }
    const Vec u = random_box_point(spec.box_lo, spec.box_hi, rng);
    const AtomicMeasure nu = random_atomic_torus(spec.dim, 6, rng);
    const AtomicMeasure nu2 = random_atomic_torus(spec.dim, 6, rng);
    const std::string where = describe_sample(x, u);

    const double un = vec_norm(u);
    const Vec fv = spec.f(x, u, nu);
    for (double v : fv) checked(v, "(F1)");
    f_growth.record(vec_norm(fv), spec.C * (1.0 + std::pow(un, spec.p)), 1e-12, where);

    const double Lv = checked(spec.L(x, u, nu), "(L3)");
    l_growth.record(std::abs(Lv), spec.C1 * (1.0 + std::pow(un, spec.q)), 1e-12, where);

    const Vec dL = spec.eval_dLdx(x, u, nu);
    for (double v : dL) checked(v, "(L4)");
    dl_growth.record(vec_norm(dL), spec.C2 * (1.0 + std::pow(un, spec.q)), 1e-12, where);

    const double dx = spec.state_dist(x, x2);
    if (dx > 1e-9) {
      const Vec f2 = spec.f(x2, u, nu);
      lip_x.record(vec_norm(vec_add(fv, vec_scale(f2, -1.0))) / dx, spec.lip_x_f, 1e-9, where);
    }

    const double dnu = w1(nu, nu2);
    if (dnu > 1e-9) {
      const Vec f3 = spec.f(x, u, nu2);
      lip_nu.record(vec_norm(vec_add(fv, vec_scale(f3, -1.0))) / dnu, spec.lip_nu_f, 1e-9, where);
      const double L3v = checked(spec.L(x, u, nu2), "(L2)");
      l2.record(std::abs(Lv - L3v), spec.l2_slope * dnu + spec.l2_offset, 1e-12, where);
    }
  }

  BoundsReport report;
  report.samples = samples;
  report.seed = seed;
  report.checks.push_back(f_growth.finish("(F1) |f| <= C(1+|u|^p)"));
  report.checks.push_back(l_growth.finish("(L3) |L| <= C1(1+|u|^q)"));
  report.checks.push_back(dl_growth.finish("(L4) |dL/dx| <= C2(1+|u|^q)"));
  report.checks.push_back(lip_x.finish("(F2) Lip_x(f)"));
  report.checks.push_back(lip_nu.finish("(F3) Lip_nu(f)"));
  report.checks.push_back(l2.finish("(L2) |dL| <= slope*d1 + offset"));
  return report;
}

namespace {

double crowd_kernel(double z, double sigma) {
  const double s = z / sigma;
  const double t = 1.0 - s * s;
  return t > 0.0 ? t * t * t : 0.0;
}

double crowd_kernel_dz(double z, double sigma) {
  const double s = z / sigma;
  const double t = 1.0 - s * s;
  return t > 0.0 ? -6.0 * z / (sigma * sigma) * t * t : 0.0;
}

ProblemSpec base_1d() {
  ProblemSpec s;
  s.dim = 1;
  s.control_dim = 1;
  s.horizon = 1.0;
  s.p = 1.0;
  s.q = 2.0;
  return s;
}

}  // namespace

ProblemSpec builtin_spec(const std::string& name) {
  if (name == "zero") {
    ProblemSpec s = base_1d();
    s.name = "zero";
    s.budget = 1.0;
    s.box_lo = {-1.0};
    s.box_hi = {1.0};
    s.atoms_per_axis = 3;
    s.f = [](const Vec&, const Vec&, const AtomicMeasure&) { return Vec{0.0}; };
    s.L = [](const Vec&, const Vec&, const AtomicMeasure&) { return 0.0; };
    s.dLdx = [](const Vec&, const Vec&, const AtomicMeasure&) { return Vec{0.0}; };
    s.dfdx = [](const Vec&, const Vec&, const AtomicMeasure&) { return Vec{0.0}; };
    s.C = 1.0;
    s.C1 = 1.0;
    s.C2 = 1.0;
    return s;
  }
  if (name == "linear-quadratic") {
    ProblemSpec s = base_1d();
    s.name = "linear-quadratic";
    s.budget = 4.0;  // T * max|u|^q: the whole simplex is feasible
    s.box_lo = {-2.0};
    s.box_hi = {2.0};
    s.atoms_per_axis = 5;
    const double c = 0.5;
    s.params["coupling"] = c;
    s.f = [](const Vec&, const Vec& u, const AtomicMeasure&) { return Vec{u[0]}; };
    s.dfdx = [](const Vec&, const Vec&, const AtomicMeasure&) { return Vec{0.0}; };
    s.L = [c](const Vec& x, const Vec& u, const AtomicMeasure& nu) {
      double crowd = 0.0;
      for (std::size_t i = 0; i < nu.size(); ++i)
        crowd += nu.weights[i] * smooth_well(wrap_signed(x[0] - nu.support[i][0]));
      return u[0] * u[0] + c * crowd;
    };
    s.dLdx = [c](const Vec& x, const Vec&, const AtomicMeasure& nu) {
      double d = 0.0;
      for (std::size_t i = 0; i < nu.size(); ++i)
        d += nu.weights[i] * smooth_well_dz(wrap_signed(x[0] - nu.support[i][0]));
      return Vec{c * d};
    };
    s.C = 1.0;
    s.C1 = 1.5;
    s.C2 = 1.6;
    s.l2_slope = c * kPi * 1.01;
    return s;
  }
  if (name == "double-well") {
    ProblemSpec s = base_1d();
    s.name = "double-well";
    s.q = 4.0;  // the well term grows like |u|^4
    s.budget = 1.0;
    s.box_lo = {-1.0};
    s.box_hi = {1.0};
    s.atoms_per_axis = 5;
    const double c = 2.0;
    const double anchor = 0.5;
    s.params["well_weight"] = c;
    s.params["anchor"] = anchor;
    s.f = [](const Vec&, const Vec& u, const AtomicMeasure&) { return Vec{u[0]}; };
    s.dfdx = [](const Vec&, const Vec&, const AtomicMeasure&) { return Vec{0.0}; };
    s.L = [c, anchor](const Vec& x, const Vec& u, const AtomicMeasure&) {
      const double w = u[0] * u[0] - 1.0;
      return w * w + c * smooth_well(wrap_signed(x[0] - anchor));
    };
    s.dLdx = [c, anchor](const Vec& x, const Vec&, const AtomicMeasure&) {
      return Vec{c * smooth_well_dz(wrap_signed(x[0] - anchor))};
    };
    s.C = 1.0;
    s.C1 = 1.0 + c + 0.01;
    s.C2 = c * kPi * 1.01;
    return s;
  }
  if (name == "crowd-aversion") {
    ProblemSpec s = base_1d();
    s.name = "crowd-aversion";
    s.budget = 1.0;
    s.box_lo = {-1.0};
    s.box_hi = {1.0};
    s.atoms_per_axis = 5;
    const double c = 1.5;
    const double sigma = 0.3;
    s.params["congestion"] = c;
    s.params["kernel_radius"] = sigma;
    s.f = [](const Vec&, const Vec& u, const AtomicMeasure&) { return Vec{u[0]}; };
    s.dfdx = [](const Vec&, const Vec&, const AtomicMeasure&) { return Vec{0.0}; };
    s.L = [c, sigma](const Vec& x, const Vec& u, const AtomicMeasure& nu) {
      double rho = 0.0;
      for (std::size_t i = 0; i < nu.size(); ++i)
        rho += nu.weights[i] * crowd_kernel(wrap_signed(x[0] - nu.support[i][0]), sigma);
      return u[0] * u[0] + c * rho;
    };
    s.dLdx = [c, sigma](const Vec& x, const Vec&, const AtomicMeasure& nu) {
      double d = 0.0;
      for (std::size_t i = 0; i < nu.size(); ++i)
        d += nu.weights[i] * crowd_kernel_dz(wrap_signed(x[0] - nu.support[i][0]), sigma);
      return Vec{c * d};
    };
    s.C = 1.0;
    s.C1 = 1.0 + c;
    // max |phi'| = 6/(sqrt(5) sigma) (4/5)^2
    const double kernel_lip = 6.0 / (std::sqrt(5.0) * sigma) * 0.64;
    s.C2 = c * kernel_lip * 1.01;
    s.l2_slope = c * kernel_lip * 1.01;
    return s;
  }
  if (name == "resnet-1d") {
    ProblemSpec s;
    s.name = "resnet-1d";
    s.dim = 1;
    s.control_dim = 3;  // (alpha, beta, rho)
    s.horizon = 1.0;
    s.p = 1.0;
    s.q = 2.0;
    s.wrap = false;  // residual state lives on R
    s.budget = 70.0;
    s.box_lo = {-1.0, -2.0, -8.0};
    s.box_hi = {1.0, 2.0, 8.0};
    s.atoms_per_axis = 3;
    s.params["side_input"] = 0.0;  // constant side input baked into the field
    s.f = [](const Vec& x, const Vec& u, const AtomicMeasure&) {
      return Vec{u[1] * std::tanh(u[0] * x[0])};
    };
    s.dfdx = [](const Vec& x, const Vec& u, const AtomicMeasure&) {
      const double t = std::tanh(u[0] * x[0]);
      return Vec{u[1] * u[0] * (1.0 - t * t)};
    };
    const double reg = 0.02;
    s.params["param_penalty"] = reg;
    s.L = [reg](const Vec&, const Vec& u, const AtomicMeasure&) {
      return reg * vec_dot(u, u);
    };
    s.dLdx = [](const Vec&, const Vec&, const AtomicMeasure&) { return Vec{0.0}; };
    s.C = 1.0;       // |beta tanh| <= |beta| <= |u|
    s.C1 = 0.05;
    s.C2 = 0.01;
    s.lip_x_f = 2.0 * 1.01;  // max |alpha*beta|
    return s;
  }
  throw std::invalid_argument(
      "unknown builtin '" + name +
      "' (choices: zero, linear-quadratic, double-well, crowd-aversion, resnet-1d)");
}

namespace {

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open spec file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string t) {
      const auto a = t.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = t.find_last_not_of(" \t\r");
      return t.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

/// Moment features of nu exposed to spec-file expressions: raw first and
/// second moments of the canonical coordinates.
void nu_features(const AtomicMeasure& nu, std::map<std::string, double>& vars) {
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    m1 += nu.weights[i] * nu.support[i][0];
    m2 += nu.weights[i] * nu.support[i][0] * nu.support[i][0];
  }
  vars["nu1"] = m1;
  vars["nu2"] = m2;
}

}  // namespace

ProblemSpec load_spec_file(const std::string& path) {
  auto kv = parse_kv_file(path);
  ProblemSpec s;
  if (auto it = kv.find("problem"); it != kv.end()) {
    s = builtin_spec(it->second);
  } else {
    if (!kv.count("f") || !kv.count("L"))
      throw std::invalid_argument("spec file needs either problem=<builtin> or f=/L= expressions");
    s = ProblemSpec{};
    s.name = "file:" + path;
    s.box_lo = {-1.0};
    s.box_hi = {1.0};
    const Expr fe = Expr::parse(kv.at("f"));
    const Expr le = Expr::parse(kv.at("L"));
    s.f = [fe](const Vec& x, const Vec& u, const AtomicMeasure& nu) {
      std::map<std::string, double> vars{{"x", x[0]}, {"u", u[0]}};
      nu_features(nu, vars);
      return Vec{fe.eval(vars)};
    };
    s.L = [le](const Vec& x, const Vec& u, const AtomicMeasure& nu) {
      std::map<std::string, double> vars{{"x", x[0]}, {"u", u[0]}};
      nu_features(nu, vars);
      return le.eval(vars);
    };
    // expression specs rely on the finite-difference derivative fallback
  }
  auto num = [&kv](const char* key, double& dst) {
    if (auto it = kv.find(key); it != kv.end()) dst = std::stod(it->second);
  };
  auto inum = [&kv](const char* key, int& dst) {
    if (auto it = kv.find(key); it != kv.end()) dst = std::stoi(it->second);
  };
  if (kv.count("dim") && std::stoi(kv.at("dim")) != s.dim)
    throw std::invalid_argument("spec file: dim must match the declared problem");
  if (kv.count("control_dim") && std::stoi(kv.at("control_dim")) != s.control_dim)
    throw std::invalid_argument("spec file: control_dim must match the declared problem");
  num("horizon", s.horizon);
  num("p", s.p);
  num("q", s.q);
  num("budget", s.budget);
  num("C", s.C);
  num("C1", s.C1);
  num("C2", s.C2);
  num("lipx_f", s.lip_x_f);
  num("lipnu_f", s.lip_nu_f);
  num("l2_slope", s.l2_slope);
  num("l2_offset", s.l2_offset);
  if (auto it = kv.find("box_lo"); it != kv.end()) s.box_lo = {std::stod(it->second)};
  if (auto it = kv.find("box_hi"); it != kv.end()) s.box_hi = {std::stod(it->second)};
  inum("atoms", s.atoms_per_axis);
  s.validate();
  return s;
}

ProblemSpec spec_from_arg(const std::string& arg) {
  if (arg.rfind("builtin:", 0) == 0) return builtin_spec(arg.substr(8));
  return load_spec_file(arg);
}

}  // namespace mfc
