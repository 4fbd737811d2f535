#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mfc/control.hpp"
#include "mfc/dynamics.hpp"

namespace mfc {

/// One training example: scalar input, per-layer side input, scalar target.
struct ResNetSample {
  double xi = 0.0;
  std::vector<double> zeta;  // one value per layer
  double target = 0.0;
};

/// Mean-field residual network: layer update
///   X_{k+1} = X_k + dt * sum_j w_{k,j} beta_j tanh(alpha_j X_k + rho_j zeta_k)
/// with one shared parameter distribution (the common control) for all
/// samples, and a terminal square loss.
struct ResNetTask {
  std::vector<ResNetSample> data;
  int layers = 16;
  double horizon = 1.0;
  std::shared_ptr<const ControlAtoms> atoms;  // parameter triples (alpha, beta, rho)
  double budget = 100.0;
  double q = 2.0;
  double moment_penalty = 0.0;  // optional additive q-moment penalty on nu

  double dt() const { return horizon / layers; }
  void validate() const;
};

/// Layer field for one parameter atom.
double resnet_psi(const Vec& a, double z, double zeta);

/// Forward pass of one sample; shares the Euler stepping code with the
/// trajectory integrator.
double resnet_forward(const ResNetTask& task, const RelaxedControl& nu,
                      const ResNetSample& sample);

Path resnet_forward_path(const ResNetTask& task, const RelaxedControl& nu,
                         const ResNetSample& sample);

/// Dataset-mean terminal loss plus the optional moment penalty.
double resnet_loss(const ResNetTask& task, const RelaxedControl& nu);

struct ResNetTrainResult {
  RelaxedControl nu;
  std::vector<double> loss_trace;  // accepted losses, starting with the initial one
  int epochs_run = 0;
  double grad_norm = 0.0;
};

/// Projected-gradient training of the shared parameter distribution: the
/// gradient is the dataset average of the per-sample discrete adjoints.
ResNetTrainResult resnet_train(const ResNetTask& task, const RelaxedControl& init, int epochs,
                               double step);

/// Seeded 1-d regression toy: inputs uniform in (-1/4, 1/4), side input
/// equal to the input, targets sin(2 pi xi).
ResNetTask toy_regression_task(int n_samples, int layers, std::uint64_t seed);

}  // namespace mfc
