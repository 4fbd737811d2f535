#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "mfc/expr.hpp"
#include "mfc/manifest.hpp"
#include "mfc/problem.hpp"
#include "mfc/serialize.hpp"
#include "test_helpers.hpp"

using namespace mfc;

TEST_CASE("expression parser") {
  const Expr e = Expr::parse("u^2 + 0.5*sin(2*pi*x) - min(nu1, 1)");
  const double v = e.eval({{"u", 2.0}, {"x", 0.25}, {"nu1", 3.0}});
  CHECK(v == doctest::Approx(4.0 + 0.5 - 1.0).epsilon(1e-12));
  CHECK(Expr::parse("-x^2").eval({{"x", 3.0}}) == doctest::Approx(-9.0));
  CHECK(Expr::parse("pow(2, 10)").eval({}) == doctest::Approx(1024.0));
  CHECK_THROWS(Expr::parse("u +"));
  CHECK_THROWS(Expr::parse("foo(u)").eval({{"u", 1.0}}));
  CHECK_THROWS(Expr::parse("u").eval({{"x", 1.0}}));
}

TEST_CASE("spec files: builtin reference and expression mode") {
  const std::string path = "/tmp/mfc_test_spec.txt";
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "problem = crowd-aversion\n";
    out << "horizon = 2.0\n";
  }
  const ProblemSpec s = load_spec_file(path);
  CHECK(s.name == "crowd-aversion");
  CHECK(s.horizon == 2.0);

  {
    std::ofstream out(path);
    out << "f = u\n";
    out << "L = u^2 + 0.25*(1 - cos(2*pi*(x - 0.5)))\n";
    out << "p = 1\nq = 2\nbudget = 2\n";
    out << "box_lo = -1\nbox_hi = 1\natoms = 5\n";
    out << "C = 1\nC1 = 1.5\nC2 = 2\n";
  }
  const ProblemSpec e = spec_from_arg(path);
  const AtomicMeasure nu = AtomicMeasure::dirac(Domain::Torus, {0.0});
  CHECK(e.f({0.3}, {0.7}, nu)[0] == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(e.L({0.5}, {1.0}, nu) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(validate_assumptions(e, 500, 3).all_pass());

  CHECK(spec_from_arg("builtin:zero").name == "zero");
  std::remove(path.c_str());
}

TEST_CASE("measure serialization round-trips bit-exactly") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const AtomicMeasure m = random_atomic_torus(1, 8, rng);
    const AtomicMeasure back = measure_from_json(measure_to_json(m));
    CHECK(back.support == m.support);
    CHECK(back.weights == m.weights);
  }
}

TEST_CASE("control and ensemble serialization round-trips bit-exactly") {
  const ProblemSpec spec = builtin_spec("linear-quadratic");
  const auto atoms = spec.make_atoms();
  Rng rng(7);
  const AtomicMeasure m0 = testing::test_m0(4, rng);
  std::vector<EnsembleParticle> parts;
  for (std::size_t i = 0; i < m0.size(); ++i)
    parts.push_back(
        {m0.support[i], testing::random_feasible_control(atoms, spec, 8, rng), m0.weights[i]});
  const PathEnsemble ens = flow_ensemble(parts, constant_flow(m0, 1.0, 8), spec);

  const RelaxedControl cback = control_from_json(control_to_json(ens.controls[0]));
  CHECK(cback.weights == ens.controls[0].weights);
  CHECK(cback.atoms->atoms == atoms->atoms);

  const PathEnsemble eback = ensemble_from_json(ensemble_to_json(ens));
  REQUIRE(eback.size() == ens.size());
  CHECK(eback.weights == ens.weights);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    CHECK(eback.paths[i].positions == ens.paths[i].positions);
    CHECK(eback.paths[i].increments == ens.paths[i].increments);
    CHECK(eback.controls[i].weights == ens.controls[i].weights);
  }
}

TEST_CASE("path CSV has one row per node") {
  const ProblemSpec spec = builtin_spec("zero");
  const auto atoms = spec.make_atoms();
  const auto mu = RelaxedControl::constant_dirac(atoms, 1.0, 4, atoms->origin_index);
  const FlowMeasure m = constant_flow(AtomicMeasure::dirac(Domain::Torus, {0.5}), 1.0, 4);
  const Path path = integrate_path({0.5}, mu, m, spec);
  const std::string csv = path_to_csv(path);
  int rows = 0;
  for (char c : csv)
    if (c == '\n') ++rows;
  CHECK(rows == 6);  // header + 5 nodes
}

TEST_CASE("manifest hash ignores volatile fields and tracks config") {
  nlohmann::json a = manifest_skeleton("solve");
  a["config"]["seed"] = 7;
  nlohmann::json b = a;
  b["timings"]["total_ms"] = 123.4;
  b["timestamps"]["written_unix_ms"] = 99;
  CHECK(manifest_hash(a) == manifest_hash(b));
  nlohmann::json c = a;
  c["config"]["seed"] = 8;
  CHECK(manifest_hash(a) != manifest_hash(c));
}

TEST_CASE("format_double survives a parse round-trip") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.index(8)));
    CHECK(std::stod(format_double(v)) == v);
  }
}
