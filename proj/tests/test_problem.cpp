#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfc/problem.hpp"
#include "test_helpers.hpp"

using namespace mfc;

namespace {

ProblemSpec toy_spec() {
  ProblemSpec s;
  s.name = "toy";
  s.box_lo = {-1.0};
  s.box_hi = {1.0};
  s.f = [](const Vec&, const Vec& u, const AtomicMeasure&) { return Vec{u[0]}; };
  s.L = [](const Vec&, const Vec& u, const AtomicMeasure&) { return u[0] * u[0]; };
  s.C = 1.0;
  s.C1 = 1.0;
  s.C2 = 1.0;
  return s;
}

}  // namespace

TEST_CASE("derived constants match the closed forms") {
  ProblemSpec s = toy_spec();
  s.p = 1.0;
  s.q = 2.0;
  s.C = 1.0;
  s.horizon = 1.0;
  s.budget = 1.0;
  const DerivedConstants dc = derive_constants(s);
  CHECK(dc.K == doctest::Approx(2.0).epsilon(1e-14));     // (2 + 2)^{1/2}
  CHECK(dc.r == doctest::Approx(2.0).epsilon(1e-14));     // q / (q - p)
  CHECK(dc.moment_p_bound == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("doubling the budget never decreases K") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    ProblemSpec s = toy_spec();
    s.p = 1.0 + rng.uniform() * 2.0;
    s.q = s.p + 0.5 + rng.uniform() * 3.0;
    s.C = 0.1 + rng.uniform() * 5.0;
    s.horizon = 0.1 + rng.uniform() * 3.0;
    s.budget = 0.1 + rng.uniform() * 5.0;
    const double k1 = derive_constants(s).K;
    s.budget *= 2.0;
    CHECK(derive_constants(s).K >= k1);
  }
}

TEST_CASE("validator passes f = u with C = 1") {
  ProblemSpec s = toy_spec();
  const BoundsReport rep = validate_assumptions(s, 500, 9);
  CHECK(rep.all_pass());
  CHECK(rep.checks[0].worst_ratio <= 1.0);
}

TEST_CASE("validator passes the quartic well with C1 = 2") {
  ProblemSpec s = toy_spec();
  s.q = 4.0;
  s.C1 = 2.0;
  s.L = [](const Vec&, const Vec& u, const AtomicMeasure&) {
    const double t = u[0] * u[0] - 1.0;
    return t * t;
  };
  // independent check of the bound: the ratio (u^2-1)^2 / (1+u^4) never
  // exceeds 1 on a fine sweep of the box
  double max_ratio = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double u = -1.0 + 2.0 * i / 4000.0;
    const double t = u * u - 1.0;
    max_ratio = std::max(max_ratio, t * t / (1.0 + u * u * u * u));
  }
  CHECK(max_ratio <= 1.0 + 1e-12);
  const BoundsReport rep = validate_assumptions(s, 2000, 10);
  CHECK(rep.all_pass());
}

TEST_CASE("validator flags f = 2u against declared C = 1") {
  ProblemSpec s = toy_spec();
  s.box_lo = {-3.0};
  s.box_hi = {3.0};
  s.f = [](const Vec&, const Vec& u, const AtomicMeasure&) { return Vec{2.0 * u[0]}; };
  const BoundsReport rep = validate_assumptions(s, 2000, 11);
  CHECK_FALSE(rep.all_pass());
  CHECK_FALSE(rep.checks[0].pass);         // (F1)
  CHECK(rep.checks[0].worst_ratio > 1.2);  // witnessed far from the origin
  CHECK(!rep.checks[0].witness.empty());
}

TEST_CASE("validator is reproducible for a fixed seed") {
  ProblemSpec s = builtin_spec("crowd-aversion");
  const BoundsReport a = validate_assumptions(s, 300, 123);
  const BoundsReport b = validate_assumptions(s, 300, 123);
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i)
    CHECK(a.checks[i].worst_ratio == b.checks[i].worst_ratio);
}

TEST_CASE("every builtin passes its declared bounds at 10k samples") {
  for (const char* name :
       {"zero", "linear-quadratic", "double-well", "crowd-aversion", "resnet-1d"}) {
    const ProblemSpec s = builtin_spec(name);
    const BoundsReport rep = validate_assumptions(s, 10000, 0);
    INFO("builtin ", name);
    for (const auto& c : rep.checks) {
      INFO(c.name, " worst ", c.worst_ratio, " witness ", c.witness);
      CHECK(c.violations == 0);
    }
  }
}

TEST_CASE("builtin zero yields zero field and cost") {
  const ProblemSpec s = builtin_spec("zero");
  const AtomicMeasure nu = AtomicMeasure::dirac(Domain::Torus, {0.5});
  CHECK(s.f({0.3}, {0.7}, nu)[0] == 0.0);
  CHECK(s.L({0.3}, {0.7}, nu) == 0.0);
}

TEST_CASE("builtin resnet-1d field vanishes at the origin state") {
  const ProblemSpec s = builtin_spec("resnet-1d");
  const AtomicMeasure nu = AtomicMeasure::dirac(Domain::Torus, {0.5});
  CHECK(s.f({0.0}, {1.0, 2.0, 0.0}, nu)[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_FALSE(s.wrap);
}

TEST_CASE("unknown builtin names the choices") {
  try {
    builtin_spec("nope");
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("linear-quadratic") != std::string::npos);
    CHECK(msg.find("crowd-aversion") != std::string::npos);
  }
}

TEST_CASE("control atom boxes must contain the origin") {
  CHECK_THROWS(ControlAtoms::from_box({0.5}, {1.0}, 3));
  const auto atoms = ControlAtoms::from_box({-1.0}, {1.0}, 5);
  CHECK(atoms->size() == 5);
  CHECK(vec_norm(atoms->atoms[atoms->origin_index]) == 0.0);
}
