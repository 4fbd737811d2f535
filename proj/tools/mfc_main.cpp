// Command-line front end: simulate, best-response, solve, certify,
// strictify, resnet-train, check.  Every run writes a manifest with the
// full configuration, derived constants, results and a reproducibility
// hash; traces go to CSV, measures/controls/ensembles to JSON.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfc/cost.hpp"
#include "mfc/dynamics.hpp"
#include "mfc/manifest.hpp"
#include "mfc/problem.hpp"
#include "mfc/resnet.hpp"
#include "mfc/serialize.hpp"
#include "mfc/solver.hpp"
#include "mfc/strictify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfc;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

AtomicMeasure make_m0(int particles, const std::string& layout, std::uint64_t seed) {
  if (particles < 1) throw std::invalid_argument("--particles must be >= 1");
  std::vector<Vec> support;
  std::vector<double> weights(particles, 1.0 / particles);
  if (layout == "uniform") {
    for (int i = 0; i < particles; ++i) support.push_back({static_cast<double>(i) / particles});
  } else if (layout == "random") {
    Rng rng(seed);
    for (int i = 0; i < particles; ++i) support.push_back({rng.uniform()});
  } else {
    throw std::invalid_argument("--m0 must be uniform or random");
  }
  double s = 0.0;
  for (double w : weights) s += w;
  weights.back() += 1.0 - s;
  return AtomicMeasure::create(Domain::Torus, std::move(support), std::move(weights));
}

std::string out_dir_for(const std::string& requested, const json& config) {
  if (!requested.empty()) return requested;
  std::ostringstream hex;
  hex << std::hex << manifest_hash(json{{"config", config}});
  return "runs/" + hex.str();
}

void echo_spec(json& cfg, const ProblemSpec& spec, const std::string& arg) {
  cfg["spec"] = arg;
  cfg["spec_name"] = spec.name;
  cfg["dim"] = spec.dim;
  cfg["control_dim"] = spec.control_dim;
  cfg["horizon"] = spec.horizon;
  cfg["p"] = spec.p;
  cfg["q"] = spec.q;
  cfg["budget"] = spec.budget;
  cfg["atoms_per_axis"] = spec.atoms_per_axis;
  for (const auto& [k, v] : spec.params) cfg["params"][k] = v;
}

void put_derived(json& doc, const ProblemSpec& spec) {
  const DerivedConstants dc = derive_constants(spec);
  doc["derived"]["K"] = dc.K;
  doc["derived"]["r"] = dc.r;
  doc["derived"]["moment_p_bound"] = dc.moment_p_bound;
}

SolverOptions solver_options(const std::string& method, int x_grid, int lattice, int iters,
                             double step) {
  SolverOptions opt;
  opt.method = method == "grad" ? BrMethod::Grad : BrMethod::Dp;
  opt.dp.x_grid = x_grid;
  opt.dp.simplex_lattice = lattice;
  opt.grad.max_iters = iters;
  opt.grad.step = step;
  return opt;
}

int cmd_check(const std::string& spec_arg, int samples, std::uint64_t seed) {
  const ProblemSpec spec = spec_from_arg(spec_arg);
  const DerivedConstants dc = derive_constants(spec);
  std::cout << "spec: " << spec.name << "\n"
            << "derived: K=" << dc.K << " r=" << dc.r << " moment_p_bound=" << dc.moment_p_bound
            << "\n";
  const BoundsReport report = validate_assumptions(spec, samples, seed);
  for (const auto& c : report.checks) {
    std::cout << (c.pass ? "[pass] " : "[FAIL] ") << c.name << "  worst_ratio=" << c.worst_ratio
              << " violations=" << c.violations;
    if (!c.pass) std::cout << "  witness: " << c.witness;
    std::cout << "\n";
  }
  return report.all_pass() ? 0 : 1;
}

int cmd_simulate(const std::string& spec_arg, int particles, const std::string& layout, int steps,
                 std::uint64_t seed, const std::string& scheme_name, std::string out) {
  Timer timer;
  const ProblemSpec spec = spec_from_arg(spec_arg);
  const Scheme scheme = scheme_name == "rk4" ? Scheme::RK4 : Scheme::Euler;

  json doc = manifest_skeleton("simulate");
  echo_spec(doc["config"], spec, spec_arg);
  doc["config"]["particles"] = particles;
  doc["config"]["m0"] = layout;
  doc["config"]["steps"] = steps;
  doc["config"]["seed"] = seed;
  doc["config"]["scheme"] = scheme_name;
  put_derived(doc, spec);

  const AtomicMeasure m0 = make_m0(particles, layout, seed);
  const auto atoms = spec.make_atoms();
  const RelaxedControl mu0 =
      RelaxedControl::constant_dirac(atoms, spec.horizon, steps, atoms->origin_index);
  std::vector<EnsembleParticle> parts;
  for (std::size_t i = 0; i < m0.size(); ++i)
    parts.push_back({m0.support[i], mu0, m0.weights[i]});
  const FlowMeasure frozen = constant_flow(m0, spec.horizon, steps);
  const PathEnsemble ensemble = flow_ensemble(parts, frozen, spec, scheme);
  const FlowMeasure flow = empirical_flow(ensemble);

  out = out_dir_for(out, doc["config"]);
  fs::create_directories(out);
  write_text_file(out + "/ensemble.json", ensemble_to_json(ensemble) + "\n");
  write_text_file(out + "/flow.json", flow_to_json(flow) + "\n");
  write_text_file(out + "/m0.json", measure_to_json(m0) + "\n");
  write_text_file(out + "/path0.csv", path_to_csv(ensemble.paths[0]));
  doc["artifacts"]["ensemble"] = out + "/ensemble.json";
  doc["artifacts"]["flow"] = out + "/flow.json";
  doc["artifacts"]["m0"] = out + "/m0.json";
  doc["results"]["support_residual"] = support_residual(ensemble, frozen, spec);
  doc["timings"]["total_ms"] = timer.ms();
  write_manifest(doc, out + "/manifest.json");
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_best_response(const std::string& spec_arg, double x0, const std::string& method, int steps,
                      int x_grid, int lattice, int iters, double step, int particles,
                      std::uint64_t seed, std::string out) {
  Timer timer;
  const ProblemSpec spec = spec_from_arg(spec_arg);

  json doc = manifest_skeleton("best-response");
  echo_spec(doc["config"], spec, spec_arg);
  doc["config"]["x0"] = x0;
  doc["config"]["method"] = method;
  doc["config"]["steps"] = steps;
  doc["config"]["x_grid"] = x_grid;
  doc["config"]["lattice"] = lattice;
  doc["config"]["iters"] = iters;
  doc["config"]["step"] = step;
  doc["config"]["particles"] = particles;
  doc["config"]["seed"] = seed;
  put_derived(doc, spec);

  const AtomicMeasure m0 = make_m0(particles, "uniform", seed);
  const FlowMeasure m = constant_flow(m0, spec.horizon, steps);
  BestResponse br;
  if (method == "dp") {
    br = best_response_dp(Vec{x0}, m, spec, DpOptions{x_grid, lattice});
  } else if (method == "grad") {
    const auto atoms = spec.make_atoms();
    const RelaxedControl init =
        RelaxedControl::constant_dirac(atoms, spec.horizon, steps, atoms->origin_index);
    br = best_response_grad(Vec{x0}, m, spec, init, GradOptions{iters, step, 1e-8});
  } else {
    throw std::invalid_argument("--method must be dp or grad");
  }

  out = out_dir_for(out, doc["config"]);
  fs::create_directories(out);
  write_text_file(out + "/control.json", control_to_json(br.control) + "\n");
  write_text_file(out + "/path.csv", path_to_csv(br.path));
  doc["artifacts"]["control"] = out + "/control.json";
  doc["results"]["cost"] = br.cost;
  doc["results"]["iterations"] = br.iterations;
  doc["results"]["grad_norm"] = br.grad_norm;
  doc["results"]["moment_q"] = moment(br.control, spec.q);
  doc["timings"]["total_ms"] = timer.ms();
  write_manifest(doc, out + "/manifest.json");
  std::cout << "cost " << br.cost << ", wrote " << out << "\n";
  return 0;
}

int cmd_solve(const std::string& spec_arg, int particles, const std::string& layout, int steps,
              double damping, double tol, int max_iters, const std::string& method, int x_grid,
              int lattice, int iters, double step, std::uint64_t seed, std::string out) {
  Timer timer;
  const ProblemSpec spec = spec_from_arg(spec_arg);

  json doc = manifest_skeleton("solve");
  echo_spec(doc["config"], spec, spec_arg);
  doc["config"]["particles"] = particles;
  doc["config"]["m0"] = layout;
  doc["config"]["steps"] = steps;
  doc["config"]["damping"] = damping;
  doc["config"]["tol"] = tol;
  doc["config"]["max_iters"] = max_iters;
  doc["config"]["method"] = method;
  doc["config"]["x_grid"] = x_grid;
  doc["config"]["lattice"] = lattice;
  doc["config"]["iters"] = iters;
  doc["config"]["step"] = step;
  doc["config"]["seed"] = seed;
  put_derived(doc, spec);

  const AtomicMeasure m0 = make_m0(particles, layout, seed);
  FixedPointOptions opt;
  opt.steps = steps;
  opt.damping = damping;
  opt.tol = tol;
  opt.max_iters = max_iters;
  opt.solver = solver_options(method, x_grid, lattice, iters, step);
  const EquilibriumResult eq = fixed_point_iterate(spec, m0, opt);

  out = out_dir_for(out, doc["config"]);
  fs::create_directories(out);
  write_text_file(out + "/ensemble.json", ensemble_to_json(eq.ensemble) + "\n");
  write_text_file(out + "/flow.json", flow_to_json(eq.flow) + "\n");
  write_text_file(out + "/m0.json", measure_to_json(m0) + "\n");
  std::ostringstream trace;
  trace << "iteration,consistency_gap,optimality_gap\n";
  for (const auto& rec : eq.trace)
    trace << rec.iteration << ',' << format_double(rec.consistency_gap) << ','
          << format_double(rec.optimality_gap) << "\n";
  write_text_file(out + "/trace.csv", trace.str());

  doc["artifacts"]["ensemble"] = out + "/ensemble.json";
  doc["artifacts"]["flow"] = out + "/flow.json";
  doc["artifacts"]["m0"] = out + "/m0.json";
  doc["artifacts"]["trace"] = out + "/trace.csv";
  doc["results"]["converged"] = eq.converged;
  doc["results"]["iterations"] = eq.iterations;
  doc["results"]["consistency_gap"] = eq.consistency_gap;
  doc["results"]["optimality_gap"] = eq.optimality_gap;
  doc["timings"]["total_ms"] = timer.ms();
  write_manifest(doc, out + "/manifest.json");
  std::cout << (eq.converged ? "converged" : "NOT converged") << " after " << eq.iterations
            << " iterations; gaps " << eq.consistency_gap << " / " << eq.optimality_gap
            << "; wrote " << out << "\n";
  return eq.converged ? 0 : 2;
}

int cmd_certify(const std::string& run, double tol) {
  const json manifest = read_json_file(run + "/manifest.json");
  const ProblemSpec spec = spec_from_arg(manifest.at("config").at("spec").get<std::string>());
  const PathEnsemble ensemble = ensemble_from_json(read_text_file(run + "/ensemble.json"));
  const AtomicMeasure m0 = measure_from_json(read_text_file(run + "/m0.json"));
  const auto& cfg = manifest.at("config");
  const SolverOptions opt =
      solver_options(cfg.value("method", "dp"), cfg.value("x_grid", 64), cfg.value("lattice", 4),
                     cfg.value("iters", 300), cfg.value("step", 0.5));
  const CertifyReport rep = certify(ensemble, m0, spec, tol, opt);
  std::cout << (rep.pass ? "[pass]" : "[FAIL]") << " initial_gap=" << rep.initial_gap
            << " support_residual=" << rep.support_residual
            << " optimality_gap=" << rep.optimality_gap << " (tol " << tol << ")\n";
  if (!rep.pass) {
    if (rep.initial_gap > tol) std::cout << "violated: initial condition match\n";
    if (rep.support_residual > tol) std::cout << "violated: state-equation support condition\n";
    if (rep.optimality_gap > tol) std::cout << "violated: best-response optimality\n";
  }
  json doc = manifest_skeleton("certify");
  doc["config"]["run"] = run;
  doc["config"]["tol"] = tol;
  doc["results"]["initial_gap"] = rep.initial_gap;
  doc["results"]["support_residual"] = rep.support_residual;
  doc["results"]["optimality_gap"] = rep.optimality_gap;
  doc["results"]["pass"] = rep.pass;
  write_manifest(doc, run + "/certify.json");
  return rep.pass ? 0 : 1;
}

int cmd_strictify(const std::string& run, int t_bins, int x_bins, double tol) {
  Timer timer;
  const json manifest = read_json_file(run + "/manifest.json");
  const ProblemSpec spec = spec_from_arg(manifest.at("config").at("spec").get<std::string>());
  const PathEnsemble ensemble = ensemble_from_json(read_text_file(run + "/ensemble.json"));
  if (t_bins <= 0) t_bins = ensemble.steps();

  const StrictResult res = strict_equilibrium_from(ensemble, spec, t_bins, x_bins, tol);
  json doc = manifest_skeleton("strictify");
  doc["config"]["run"] = run;
  doc["config"]["t_bins"] = t_bins;
  doc["config"]["x_bins"] = x_bins;
  doc["config"]["tol"] = tol;

  std::ostringstream cells;
  cells << "t_bin,x_bin,mass,alpha,z1,z2,f_match,feasible\n";
  for (const auto& c : res.cells) {
    cells << c.t_bin << ',' << c.x_bin << ',' << format_double(c.mass) << ",\"";
    for (std::size_t a = 0; a < c.outcome.alpha.size(); ++a)
      cells << (a ? ";" : "") << format_double(c.outcome.alpha[a]);
    cells << "\"," << format_double(c.outcome.z1) << ',' << format_double(c.outcome.z2) << ','
          << format_double(c.outcome.f_match) << ',' << (c.outcome.feasible ? 1 : 0) << "\n";
  }
  write_text_file(run + "/selection.csv", cells.str());
  doc["artifacts"]["selection"] = run + "/selection.csv";

  if (!res.success) {
    std::cout << "[FAIL] non-convexity witness in cell (t_bin=" << res.witness_t_bin
              << ", x_bin=" << res.witness_x_bin << "): mixture over {";
    for (std::size_t a = 0; a < res.witness_atoms.size(); ++a) {
      if (res.witness_probs[a] <= 1e-12) continue;
      std::cout << " u=" << res.witness_atoms[a][0] << " (w=" << res.witness_probs[a] << ")";
    }
    std::cout << " } has z1=" << res.witness_outcome.z1 << " z2=" << res.witness_outcome.z2
              << " f_match=" << res.witness_outcome.f_match << "\n";
    doc["results"]["success"] = false;
    doc["results"]["witness_t_bin"] = res.witness_t_bin;
    doc["results"]["witness_x_bin"] = res.witness_x_bin;
    write_manifest(doc, run + "/strict_manifest.json");
    return 1;
  }

  const FeedbackControl fb = feedback_from(ensemble, t_bins, x_bins);
  write_text_file(run + "/feedback.json", feedback_to_json(fb) + "\n");
  write_text_file(run + "/strict_ensemble.json", ensemble_to_json(res.pure) + "\n");
  doc["artifacts"]["feedback"] = run + "/feedback.json";
  doc["artifacts"]["strict_ensemble"] = run + "/strict_ensemble.json";
  doc["results"]["success"] = true;
  doc["results"]["cost_original"] = res.cost_original;
  doc["results"]["cost_pure"] = res.cost_pure;
  doc["results"]["cost_preserved"] = res.cost_preserved;
  doc["results"]["flow_gap"] = res.flow_gap;
  doc["timings"]["total_ms"] = timer.ms();
  write_manifest(doc, run + "/strict_manifest.json");
  std::cout << "strict equilibrium extracted: J(m,P0)=" << res.cost_pure
            << " vs J(m,P)=" << res.cost_original << ", flow gap " << res.flow_gap << "\n";
  return 0;
}

int cmd_resnet(int samples, int layers, int epochs, double step, std::uint64_t seed,
               std::string out) {
  Timer timer;
  json doc = manifest_skeleton("resnet-train");
  doc["config"]["samples"] = samples;
  doc["config"]["layers"] = layers;
  doc["config"]["epochs"] = epochs;
  doc["config"]["step"] = step;
  doc["config"]["seed"] = seed;
  doc["config"]["common_control"] = true;

  const ResNetTask task = toy_regression_task(samples, layers, seed);
  const RelaxedControl init =
      RelaxedControl::constant_dirac(task.atoms, task.horizon, task.layers, 0);
  const ResNetTrainResult res = resnet_train(task, init, epochs, step);

  out = out_dir_for(out, doc["config"]);
  fs::create_directories(out);
  std::ostringstream trace;
  trace << "epoch,loss\n";
  for (std::size_t e = 0; e < res.loss_trace.size(); ++e)
    trace << e << ',' << format_double(res.loss_trace[e]) << "\n";
  write_text_file(out + "/loss.csv", trace.str());
  write_text_file(out + "/nu.json", control_to_json(res.nu) + "\n");
  doc["artifacts"]["loss_trace"] = out + "/loss.csv";
  doc["artifacts"]["nu"] = out + "/nu.json";
  doc["results"]["initial_loss"] = res.loss_trace.front();
  doc["results"]["final_loss"] = res.loss_trace.back();
  doc["results"]["epochs_run"] = res.epochs_run;
  doc["timings"]["total_ms"] = timer.ms();
  write_manifest(doc, out + "/manifest.json");
  std::cout << "loss " << res.loss_trace.front() << " -> " << res.loss_trace.back() << " in "
            << res.epochs_run << " epochs; wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"first-order mean field control with relaxed controls"};
  app.require_subcommand(1);

  std::string spec_arg = "builtin:linear-quadratic";
  std::string out;
  std::string layout = "uniform";
  std::string method = "dp";
  std::string scheme = "euler";
  std::string run;
  int particles = 16, steps = 32, x_grid = 64, lattice = 4, iters = 300;
  int samples = 10000, train_samples = 64, epochs = 500, layers = 16, t_bins = 0, x_bins = 32;
  int max_iters = 200;
  double x0 = 0.5, step = 0.5, damping = 0.5, tol = 1e-3;
  std::uint64_t seed = 0;

  auto* check = app.add_subcommand("check", "validate declared assumption bounds by sampling");
  check->add_option("--spec", spec_arg);
  check->add_option("--samples", samples);
  check->add_option("--seed", seed);

  auto* sim = app.add_subcommand("simulate", "integrate the origin-control ensemble");
  sim->add_option("--spec", spec_arg);
  sim->add_option("--particles", particles);
  sim->add_option("--m0", layout);
  sim->add_option("--steps", steps);
  sim->add_option("--seed", seed);
  sim->add_option("--scheme", scheme)->check(CLI::IsMember({"euler", "rk4"}));
  sim->add_option("--out", out);

  auto* br = app.add_subcommand("best-response", "single-agent best response");
  br->add_option("--spec", spec_arg);
  br->add_option("--x0", x0);
  br->add_option("--method", method)->check(CLI::IsMember({"dp", "grad"}));
  br->add_option("--steps", steps);
  br->add_option("--x-grid", x_grid);
  br->add_option("--lattice", lattice);
  br->add_option("--iters", iters);
  br->add_option("--step", step);
  br->add_option("--particles", particles);
  br->add_option("--seed", seed);
  br->add_option("--out", out);

  auto* solve = app.add_subcommand("solve", "damped best-response fixed point");
  solve->add_option("--spec", spec_arg);
  solve->add_option("--particles", particles);
  solve->add_option("--m0", layout);
  solve->add_option("--steps", steps);
  solve->add_option("--damping", damping);
  solve->add_option("--tol", tol);
  solve->add_option("--max-iters", max_iters);
  solve->add_option("--method", method)->check(CLI::IsMember({"dp", "grad"}));
  solve->add_option("--x-grid", x_grid);
  solve->add_option("--lattice", lattice);
  solve->add_option("--iters", iters);
  solve->add_option("--step", step);
  solve->add_option("--seed", seed);
  solve->add_option("--out", out);

  auto* cert = app.add_subcommand("certify", "re-check a solve run's equilibrium conditions");
  cert->add_option("--run", run)->required();
  cert->add_option("--tol", tol);

  auto* strict = app.add_subcommand("strictify", "extract a pure-control equilibrium");
  strict->add_option("--run", run)->required();
  strict->add_option("--t-bins", t_bins);
  strict->add_option("--x-bins", x_bins);
  strict->add_option("--tol", tol);

  auto* resnet = app.add_subcommand("resnet-train", "train the shared-parameter residual network");
  resnet->add_option("--samples", train_samples);
  resnet->add_option("--layers", layers);
  resnet->add_option("--epochs", epochs);
  resnet->add_option("--step", step);
  resnet->add_option("--seed", seed);
  resnet->add_option("--out", out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check(spec_arg, samples, seed);
    if (sim->parsed()) return cmd_simulate(spec_arg, particles, layout, steps, seed, scheme, out);
    if (br->parsed())
      return cmd_best_response(spec_arg, x0, method, steps, x_grid, lattice, iters, step,
                               particles, seed, out);
    if (solve->parsed())
      return cmd_solve(spec_arg, particles, layout, steps, damping, tol, max_iters, method, x_grid,
                       lattice, iters, step, seed, out);
    if (cert->parsed()) return cmd_certify(run, tol);
    if (strict->parsed()) return cmd_strictify(run, t_bins, x_bins, tol);
    if (resnet->parsed()) return cmd_resnet(train_samples, layers, epochs, step, seed, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
