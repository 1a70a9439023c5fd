#include <cmath>

#include "doctest.h"
#include "dsim/program.hpp"
#include "dsim/rng.hpp"

using namespace dsim;

namespace {

// min x subject to x >= 1  ->  x* = 1, multiplier 1.
TEST_CASE("scalar lp with active bound") {
  ConicProgram p;
  const int x = p.add_var(1.0, 5.0);
  IneqRow& row = p.add_ineq(RowTag::kSlowBoundLow, 0, -1.0);
  row.lin.push_back({x, -1.0});
  SolveResult r = solve(p);
  REQUIRE(r.status == SolveStatus::kOptimal);
  CHECK(r.x[x] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.ineq_duals[0] == doctest::Approx(1.0).epsilon(1e-4));
}

// min c x subject to x = b: equality dual must equal dV/db = c.
TEST_CASE("equality dual convention") {
  ConicProgram p;
  const int x = p.add_var(3.5, 0.0);
  const int t = p.add_var(1.0, 10.0);  // bounded helper so the IPM has an ineq
  IneqRow& row = p.add_ineq(RowTag::kSlowBoundLow, 0, 0.0);
  row.lin.push_back({t, -1.0});
  EqRow& eq = p.add_eq(RowTag::kSubstationSplit, 0, 2.0, true);
  eq.terms.push_back({x, 1.0});
  SolveResult r = solve(p);
  REQUIRE(r.status == SolveStatus::kOptimal);
  CHECK(r.x[x] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(r.eq_duals[0] == doctest::Approx(3.5).epsilon(1e-6));
}

// min (x-3)^2 via epigraph: t >= (x-3)^2, min t. Solution x = 3, t = 0.
TEST_CASE("quadratic epigraph") {
  ConicProgram p;
  const int x = p.add_var(0.0, 0.0);
  const int t = p.add_var(1.0, 20.0);
  IneqRow& row = p.add_ineq(RowTag::kDieselCostEpigraph, 0, 0.0);
  row.squares.push_back({{x, 1.0}});
  row.square_offsets.push_back(-3.0);
  row.lin.push_back({t, -1.0});
  SolveResult r = solve(p);
  REQUIRE(r.status == SolveStatus::kOptimal);
  CHECK(r.x[x] == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(r.objective < 1e-6);
}

// Projection onto a disk: min -x - y s.t. x^2 + y^2 <= 2. Optimum (1, 1).
TEST_CASE("disk constraint") {
  ConicProgram p;
  const int x = p.add_var(-1.0, 0.0);
  const int y = p.add_var(-1.0, 0.0);
  IneqRow& row = p.add_ineq(RowTag::kPvApparent, 0, 2.0);
  row.squares.push_back({{x, 1.0}});
  row.square_offsets.push_back(0.0);
  row.squares.push_back({{y, 1.0}});
  row.square_offsets.push_back(0.0);
  SolveResult r = solve(p);
  REQUIRE(r.status == SolveStatus::kOptimal);
  CHECK(r.x[x] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x[y] == doctest::Approx(1.0).epsilon(1e-6));
}

// x >= 1 and x <= 0 cannot both hold.
TEST_CASE("infeasible box detected") {
  ConicProgram p;
  const int x = p.add_var(1.0, 0.5);
  IneqRow& lo = p.add_ineq(RowTag::kSlowBoundLow, 0, -1.0);
  lo.lin.push_back({x, -1.0});
  IneqRow& hi = p.add_ineq(RowTag::kSlowBoundHigh, 0, 0.0);
  hi.lin.push_back({x, 1.0});
  SolveResult r = solve(p);
  CHECK(r.status == SolveStatus::kInfeasible);
}

// Equality forcing a variable outside its box; needs phase-1 to classify.
TEST_CASE("infeasible equality-box combination detected") {
  ConicProgram p;
  const int x = p.add_var(0.0, 0.5);
  const int y = p.add_var(1.0, 0.5);
  IneqRow& hi = p.add_ineq(RowTag::kSlowBoundHigh, 0, 1.0);
  hi.lin.push_back({x, 1.0});
  IneqRow& lo = p.add_ineq(RowTag::kSlowBoundLow, 0, 0.0);
  lo.lin.push_back({y, -1.0});
  EqRow& eq = p.add_eq(RowTag::kActiveBalance, 0, 5.0, false);
  eq.terms.push_back({x, 1.0});
  eq.terms.push_back({y, -1.0});  // x - y = 5 with x <= 1, y >= 0
  SolveResult r = solve(p);
  CHECK(r.status == SolveStatus::kInfeasible);
}

// Fixed variables are eliminated, including inside squares.
TEST_CASE("fixed variable elimination") {
  ConicProgram p;
  const int x = p.add_var(1.0, 4.0);
  const int z = p.add_var(0.0, 0.0);
  p.fix_var(z, 2.0);
  // (x + z)^2 <= 9 with z = 2: feasible x in [-5, 1]; minimize x -> -5.
  IneqRow& row = p.add_ineq(RowTag::kPvApparent, 0, 9.0);
  row.squares.push_back({{x, 1.0}, {z, 1.0}});
  row.square_offsets.push_back(0.0);
  SolveResult r = solve(p);
  REQUIRE(r.status == SolveStatus::kOptimal);
  CHECK(r.x[x] == doctest::Approx(-5.0).epsilon(1e-6));
  CHECK(r.x[z] == 2.0);
}

// A fully fixed row that is violated makes the program infeasible.
TEST_CASE("constant row consistency") {
  ConicProgram p;
  const int x = p.add_var(1.0, 0.5);
  const int z = p.add_var(0.0, 0.0);
  p.fix_var(z, 3.0);
  IneqRow& lo = p.add_ineq(RowTag::kSlowBoundLow, 0, 0.0);
  lo.lin.push_back({x, -1.0});
  EqRow& eq = p.add_eq(RowTag::kSlowBoundLow, 0, 1.0, false);
  eq.terms.push_back({z, 1.0});  // 3 == 1 is false
  SolveResult r = solve(p);
  CHECK(r.status == SolveStatus::kInfeasible);
}

// An interior hint that is not actually interior still gets repaired.
TEST_CASE("bad hint falls back to phase-1") {
  ConicProgram p;
  const int x = p.add_var(1.0, -10.0);  // hint violates x >= 1
  IneqRow& row = p.add_ineq(RowTag::kSlowBoundLow, 0, -1.0);
  row.lin.push_back({x, -1.0});
  SolveResult r = solve(p);
  REQUIRE(r.status == SolveStatus::kOptimal);
  CHECK(r.x[x] == doctest::Approx(1.0).epsilon(1e-6));
}

// Randomized LPs: compare against enumerating basic solutions on a box.
TEST_CASE("random box lps match vertex enumeration") {
  RngStream rng(33, 0);
  for (int trial = 0; trial < 20; ++trial) {
    ConicProgram p;
    const int n = 4;
    Vec c(n);
    std::vector<int> vars;
    for (int i = 0; i < n; ++i) {
      c[i] = rng.uniform(-2, 2);
      vars.push_back(p.add_var(c[i], 0.0));
      IneqRow& lo = p.add_ineq(RowTag::kSlowBoundLow, i, 1.0);
      lo.lin.push_back({vars[i], -1.0});
      IneqRow& hi = p.add_ineq(RowTag::kSlowBoundHigh, i, 1.0);
      hi.lin.push_back({vars[i], 1.0});
    }
    SolveResult r = solve(p);
    REQUIRE(r.status == SolveStatus::kOptimal);
    double best = 0.0;
    for (int i = 0; i < n; ++i) best -= std::abs(c[i]);  // optimum at sign corner
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-6));
  }
}

}  // namespace
