#include "mfc/resnet.hpp"

#include <cmath>
#include <stdexcept>

#include "mfc/rng.hpp"

namespace mfc {

void ResNetTask::validate() const {
  if (data.empty()) throw std::invalid_argument("ResNetTask: empty dataset");
  if (layers < 1 || horizon <= 0.0) throw std::invalid_argument("ResNetTask: bad layer grid");
  if (!atoms) throw std::invalid_argument("ResNetTask: missing parameter atoms");
  if (atoms->dim() != 3) throw std::invalid_argument("ResNetTask: atoms must be (alpha,beta,rho)");
  bool zero_output = false;
  for (const Vec& a : atoms->atoms)
    if (std::abs(a[1]) <= 1e-12) zero_output = true;
  if (!zero_output) throw std::invalid_argument("ResNetTask: needs a zero-output (beta=0) atom");
  for (const auto& s : data)
    if (s.zeta.size() != static_cast<std::size_t>(layers))
      throw std::invalid_argument("ResNetTask: zeta path length must equal layer count");
}

double resnet_psi(const Vec& a, double z, double zeta) {
  return a[1] * std::tanh(a[0] * z + a[2] * zeta);
}

namespace {

/// Mirrors averaged_drift: zero-weight atoms are skipped, accumulation is
/// atom-ordered, so forwards agree bit-for-bit with integrate_path on an
/// equivalent spec.
Vec resnet_drift(const ResNetTask& task, const RelaxedControl& nu, const ResNetSample& sample,
                 int k, const Vec& x) {
  Vec v(1, 0.0);
  const auto& row = nu.weights[k];
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] == 0.0) continue;
    vec_axpy(v, row[j], Vec{resnet_psi(task.atoms->atoms[j], x[0], sample.zeta[k])});
  }
  return v;
}

}  // namespace

Path resnet_forward_path(const ResNetTask& task, const RelaxedControl& nu,
                         const ResNetSample& sample) {
  if (nu.atoms.get() != task.atoms.get() && nu.atoms->atoms != task.atoms->atoms)
    throw std::invalid_argument("resnet_forward: control atoms must be the task atoms");
  if (nu.steps() != task.layers || nu.horizon != task.horizon)
    throw std::invalid_argument("resnet_forward: layer grid mismatch");
  return integrate_steps(
      Vec{sample.xi},
      [&](int k, const Vec& x) { return resnet_drift(task, nu, sample, k, x); }, task.horizon,
      task.layers, /*wrap=*/false);
}

double resnet_forward(const ResNetTask& task, const RelaxedControl& nu,
                      const ResNetSample& sample) {
  return resnet_forward_path(task, nu, sample).positions.back()[0];
}

double resnet_loss(const ResNetTask& task, const RelaxedControl& nu) {
  task.validate();
  double total = 0.0;
  for (const auto& sample : task.data) {
    const double err = resnet_forward(task, nu, sample) - sample.target;
    total += err * err;
  }
  total /= static_cast<double>(task.data.size());
  if (task.moment_penalty > 0.0) total += task.moment_penalty * moment(nu, task.q);
  return total;
}

namespace {

/// Dataset-averaged adjoint gradient of the shared control.
std::vector<std::vector<double>> resnet_gradient(const ResNetTask& task,
                                                 const RelaxedControl& nu) {
  const int n = task.layers;
  const double dt = task.dt();
  const std::size_t M = task.atoms->size();
  std::vector<std::vector<double>> grad(n, std::vector<double>(M, 0.0));
  const double inv_s = 1.0 / static_cast<double>(task.data.size());

  for (const auto& sample : task.data) {
    const Path path = resnet_forward_path(task, nu, sample);
    double p = 2.0 * (path.positions[n][0] - sample.target);  // terminal loss adjoint
    for (int k = n - 1; k >= 0; --k) {
      const double z = path.positions[k][0];
      for (std::size_t j = 0; j < M; ++j)
        grad[k][j] += inv_s * dt * p * resnet_psi(task.atoms->atoms[j], z, sample.zeta[k]);
      double dfdz = 0.0;
      for (std::size_t j = 0; j < M; ++j) {
        const double w = nu.weights[k][j];
        if (w == 0.0) continue;
        const Vec& a = task.atoms->atoms[j];
        const double t = std::tanh(a[0] * z + a[2] * sample.zeta[k]);
        dfdz += w * a[1] * a[0] * (1.0 - t * t);
      }
      p = p * (1.0 + dt * dfdz);
    }
  }
  if (task.moment_penalty > 0.0) {
    for (int k = 0; k < n; ++k)
      for (std::size_t j = 0; j < M; ++j)
        grad[k][j] += task.moment_penalty * dt *
                      std::pow(vec_norm(task.atoms->atoms[j]), task.q);
  }
  return grad;
}

RelaxedControl resnet_step(const ResNetTask& task, const RelaxedControl& nu,
                           const std::vector<std::vector<double>>& grad, double step) {
  RelaxedControl next = nu;
  for (int k = 0; k < nu.steps(); ++k) {
    std::vector<double> moved = nu.weights[k];
    for (std::size_t j = 0; j < moved.size(); ++j) moved[j] -= step * grad[k][j];
    next.weights[k] = project_to_simplex(moved);
  }
  return enforce_budget(next, task.budget, task.q);
}

double frob(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t j = 0; j < a[k].size(); ++j) {
      const double d = a[k][j] - b[k][j];
      s += d * d;
    }
  return std::sqrt(s);
}

}  // namespace

ResNetTrainResult resnet_train(const ResNetTask& task, const RelaxedControl& init, int epochs,
                               double step) {
  task.validate();
  init.validate();
  RelaxedControl nu = enforce_budget(init, task.budget, task.q);
  double loss = resnet_loss(task, nu);

  ResNetTrainResult out;
  out.loss_trace.push_back(loss);
  int epoch = 0;
  double pg_norm = 0.0;
  for (; epoch < epochs; ++epoch) {
    const auto grad = resnet_gradient(task, nu);
    RelaxedControl base = resnet_step(task, nu, grad, step);
    pg_norm = frob(nu.weights, base.weights) / step;
    if (pg_norm <= 1e-10) break;

    double trial = step;
    RelaxedControl cand = std::move(base);
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      const double cand_loss = resnet_loss(task, cand);
      if (cand_loss <= loss) {
        nu = std::move(cand);
        loss = cand_loss;
        accepted = true;
        break;
      }
      trial *= 0.5;
      cand = resnet_step(task, nu, grad, trial);
    }
    if (!accepted) break;
    out.loss_trace.push_back(loss);
  }
  out.nu = std::move(nu);
  out.epochs_run = epoch;
  out.grad_norm = pg_norm;
  return out;
}

ResNetTask toy_regression_task(int n_samples, int layers, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("toy_regression_task: need samples");
  ResNetTask task;
  task.layers = layers;
  task.horizon = 1.0;
  task.q = 2.0;
  task.budget = 32.0;  // max atom |u|^2 is 29, so the whole simplex is feasible
  task.atoms = ControlAtoms::make({
      {0.0, 0.0, 0.0},   // zero-output atom
      {0.0, 1.0, 5.0},
      {0.0, -1.0, 5.0},
      {0.0, 2.0, 5.0},
      {0.0, 1.0, 2.0},
      {0.0, -1.0, 2.0},
      {0.0, 1.0, 9.0},
      {0.0, -1.0, 9.0},
  });
  Rng rng(seed);
  const double two_pi = 6.283185307179586476925286766559;
  for (int s = 0; s < n_samples; ++s) {
    ResNetSample sample;
    sample.xi = rng.uniform(-0.25, 0.25);
    sample.zeta.assign(layers, sample.xi);  // side input: the raw input at every layer
    sample.target = std::sin(two_pi * sample.xi);
    task.data.push_back(std::move(sample));
  }
  return task;
}

}  // namespace mfc
