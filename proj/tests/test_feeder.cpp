#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "dsim/feeder.hpp"
#include "dsim/rng.hpp"

using namespace dsim;

namespace {

std::string two_bus_json(const std::string& prices =
                             R"({"beta":37,"gamma_buy":45,"gamma_sell":19})") {
  return R"({
    "base": {"power_MVA": 1.0, "voltage_kV": 12.0},
    "buses": [{"id":0},{"id":1,"load_p_MW":1.0,"load_q_MVAr":0.5}],
    "lines": [{"from":0,"to":1,"r_pu":0.01,"x_pu":0.02,"s_max_MVA":5.0}],
    "pv_units": [],
    "diesel_units": [],
    "prices": )" + prices + R"(,
    "voltage_regions": {"va_min":0.9604,"va_max":1.0404,"vb_min":0.9409,
                        "vb_max":1.0609,"v0_min":0.9216,"v0_max":1.0816}
  })";
}

FeederModel path3(double r1 = 0.01, double r2 = 0.02) {
  std::string text = R"({
    "base": {"power_MVA": 1.0, "voltage_kV": 12.0},
    "buses": [{"id":0},{"id":1},{"id":2}],
    "lines": [{"from":0,"to":1,"r_pu":)" + std::to_string(r1) +
                     R"(,"x_pu":0.02,"s_max_MVA":5.0},
              {"from":1,"to":2,"r_pu":)" + std::to_string(r2) +
                     R"(,"x_pu":0.03,"s_max_MVA":5.0}],
    "prices": {"beta":37,"gamma_buy":45,"gamma_sell":19},
    "voltage_regions": {"va_min":0.9604,"va_max":1.0404,"vb_min":0.9409,
                        "vb_max":1.0609,"v0_min":0.9216,"v0_max":1.0816}
  })";
  return parse_feeder(text);
}

}  // namespace

TEST_CASE("bundled feeder15 loads and validates") {
  FeederModel m = load_feeder(std::string(DSIM_DATA_DIR) + "/feeder15.json");
  CHECK(m.n() == 15);
  CHECK(m.pv_units.size() == 2);
  CHECK(m.diesel_units.size() == 3);
  // Canonical numbering: line k feeds bus k+1.
  for (int k = 0; k < m.n(); ++k) CHECK(m.lines[k].to == k + 1);
}

TEST_CASE("cycle is rejected as non-radial") {
  std::string text = R"({
    "base": {"power_MVA": 1.0, "voltage_kV": 12.0},
    "buses": [{"id":0},{"id":1},{"id":2},{"id":3}],
    "lines": [{"from":1,"to":2,"r_pu":0.01,"x_pu":0.02,"s_max_MVA":5},
              {"from":2,"to":3,"r_pu":0.01,"x_pu":0.02,"s_max_MVA":5},
              {"from":3,"to":1,"r_pu":0.01,"x_pu":0.02,"s_max_MVA":5}],
    "prices": {"beta":37,"gamma_buy":45,"gamma_sell":19},
    "voltage_regions": {"va_min":0.9604,"va_max":1.0404,"vb_min":0.9409,
                        "vb_max":1.0609,"v0_min":0.9216,"v0_max":1.0816}
  })";
  CHECK_THROWS_WITH_AS(parse_feeder(text), doctest::Contains("non-radial"), FeederError);
}

TEST_CASE("arbitrage condition enforced") {
  CHECK_THROWS_WITH_AS(
      parse_feeder(two_bus_json(R"({"beta":37,"gamma_buy":45,"gamma_sell":40})")),
      doctest::Contains("arbitrage"), FeederError);
}

TEST_CASE("voltage region nesting enforced") {
  std::string bad = R"({
    "base": {"power_MVA": 1.0, "voltage_kV": 12.0},
    "buses": [{"id":0},{"id":1}],
    "lines": [{"from":0,"to":1,"r_pu":0.01,"x_pu":0.02,"s_max_MVA":5}],
    "prices": {"beta":37,"gamma_buy":45,"gamma_sell":19},
    "voltage_regions": {"va_min":0.93,"va_max":1.0404,"vb_min":0.9409,
                        "vb_max":1.0609,"v0_min":0.9216,"v0_max":1.0816}
  })";
  CHECK_THROWS_WITH_AS(parse_feeder(bad), doctest::Contains("nest"), FeederError);
}

TEST_CASE("incidence of a single line") {
  FeederModel m = parse_feeder(two_bus_json());
  auto [a0, a] = build_incidence(m);
  CHECK(a0[0] == 1.0);
  CHECK(a(0, 0) == -1.0);
}

TEST_CASE("incidence of a path and a star") {
  FeederModel path = path3();
  auto [a0p, ap] = build_incidence(path);
  CHECK(ap(0, 0) == -1.0);
  CHECK(ap(0, 1) == 0.0);
  CHECK(ap(1, 0) == 1.0);
  CHECK(ap(1, 1) == -1.0);

  std::string star_text = R"({
    "base": {"power_MVA": 1.0, "voltage_kV": 12.0},
    "buses": [{"id":0},{"id":1},{"id":2}],
    "lines": [{"from":0,"to":1,"r_pu":0.01,"x_pu":0.02,"s_max_MVA":5},
              {"from":0,"to":2,"r_pu":0.01,"x_pu":0.02,"s_max_MVA":5}],
    "prices": {"beta":37,"gamma_buy":45,"gamma_sell":19},
    "voltage_regions": {"va_min":0.9604,"va_max":1.0404,"vb_min":0.9409,
                        "vb_max":1.0609,"v0_min":0.9216,"v0_max":1.0816}
  })";
  FeederModel star = parse_feeder(star_text);
  auto [a0s, as] = build_incidence(star);
  CHECK(as(0, 0) == -1.0);
  CHECK(as(0, 1) == 0.0);
  CHECK(as(1, 0) == 0.0);
  CHECK(as(1, 1) == -1.0);
}

TEST_CASE("lines given backwards are reoriented") {
  std::string text = R"({
    "base": {"power_MVA": 1.0, "voltage_kV": 12.0},
    "buses": [{"id":0},{"id":1},{"id":2}],
    "lines": [{"from":2,"to":1,"r_pu":0.02,"x_pu":0.03,"s_max_MVA":5},
              {"from":1,"to":0,"r_pu":0.01,"x_pu":0.02,"s_max_MVA":5}],
    "prices": {"beta":37,"gamma_buy":45,"gamma_sell":19},
    "voltage_regions": {"va_min":0.9604,"va_max":1.0404,"vb_min":0.9409,
                        "vb_max":1.0609,"v0_min":0.9216,"v0_max":1.0816}
  })";
  FeederModel m = parse_feeder(text);
  CHECK(m.lines[0].from == 0);
  CHECK(m.lines[0].to == 1);
  CHECK(m.lines[0].reoriented);
  CHECK(m.lines[0].r_pu == 0.01);
  CHECK(m.lines[1].from == 1);
  CHECK(m.lines[1].to == 2);
}

TEST_CASE("two-bus sensitivities") {
  FeederModel m = parse_feeder(two_bus_json());
  SensitivityBundle s = build_sensitivity(m);
  CHECK(s.F(0, 0) == doctest::Approx(-1.0));
  CHECK(s.R(0, 0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(s.X(0, 0) == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("path sensitivities follow the common-path form") {
  FeederModel m = path3();
  SensitivityBundle s = build_sensitivity(m);
  CHECK(s.R(0, 0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(s.R(0, 1) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(s.R(1, 0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(s.R(1, 1) == doctest::Approx(0.03).epsilon(1e-12));
}

TEST_CASE("feeder15 matrix identities") {
  FeederModel m = load_feeder(std::string(DSIM_DATA_DIR) + "/feeder15.json");
  SensitivityBundle s = build_sensitivity(m);
  auto [a0, a] = build_incidence(m);

  Mat residual = a * s.F - Mat::Identity(m.n(), m.n());
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s.R - s.R.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.X - s.X.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::SelfAdjointEigenSolver<Mat> er(s.R), ex(s.X);
  CHECK(er.eigenvalues().minCoeff() > 0.0);
  CHECK(ex.eigenvalues().minCoeff() > 0.0);

  // Common-path closed form from the tree structure.
  std::vector<int> parent(m.n() + 1, 0);
  for (const Line& ln : m.lines) parent[ln.to] = ln.from;
  auto path_to_root = [&](int bus) {
    std::vector<int> lines;
    for (int b = bus; b != 0; b = parent[b]) lines.push_back(b - 1);
    return lines;
  };
  for (int i = 1; i <= m.n(); ++i) {
    for (int j = 1; j <= m.n(); ++j) {
      auto pi = path_to_root(i), pj = path_to_root(j);
      double sum = 0.0;
      for (int li : pi)
        for (int lj : pj)
          if (li == lj) sum += m.lines[li].r_pu;
      CHECK(std::abs(s.R(i - 1, j - 1) - sum) < 1e-12);
    }
  }
}

TEST_CASE("voltage relation on hand examples") {
  FeederModel m = parse_feeder(two_bus_json());
  SensitivityBundle s = build_sensitivity(m);

  Vec zero = Vec::Zero(1);
  CHECK(voltages(s, zero, zero, 1.0)[0] == doctest::Approx(1.0));

  Vec p = Vec::Constant(1, 1.0), q = Vec::Constant(1, 0.5);
  CHECK(voltages(s, p, q, 1.0)[0] == doctest::Approx(1.04).epsilon(1e-12));
}

TEST_CASE("voltages are affine: superposition") {
  FeederModel m = load_feeder(std::string(DSIM_DATA_DIR) + "/feeder15.json");
  SensitivityBundle s = build_sensitivity(m);
  const int n = m.n();
  RngStream rng(9, 0);
  for (int trial = 0; trial < 5; ++trial) {
    Vec p1(n), p2(n), q(n);
    for (int i = 0; i < n; ++i) {
      p1[i] = rng.uniform(-1, 1);
      p2[i] = rng.uniform(-1, 1);
      q[i] = rng.uniform(-1, 1);
    }
    Vec lhs = voltages(s, p1 + p2, q, 1.0) - voltages(s, p2, q, 1.0);
    Vec rhs = voltages(s, p1, Vec::Zero(n), 0.0);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("line flows on hand examples") {
  FeederModel two = parse_feeder(two_bus_json());
  SensitivityBundle s2 = build_sensitivity(two);
  Vec load = Vec::Constant(1, -1.0);
  auto [pf, qf] = line_flows(s2, load, Vec::Zero(1));
  CHECK(std::abs(pf[0]) == doctest::Approx(1.0));
  auto [pz, qz] = line_flows(s2, Vec::Zero(1), Vec::Zero(1));
  CHECK(pz[0] == 0.0);

  FeederModel m = path3();
  SensitivityBundle s = build_sensitivity(m);
  Vec p = Vec::Constant(2, -1.0);  // 1 MW load at each bus
  auto [pp, qq] = line_flows(s, p, Vec::Zero(2));
  CHECK(std::abs(pp[0]) == doctest::Approx(2.0));
  CHECK(std::abs(pp[1]) == doctest::Approx(1.0));
}

TEST_CASE("quadratic losses") {
  FeederModel m = parse_feeder(two_bus_json());
  SensitivityBundle s = build_sensitivity(m);
  CHECK(losses_quadratic(s, Vec::Zero(1), Vec::Zero(1)) == 0.0);
  CHECK(losses_quadratic(s, Vec::Constant(1, 1.0), Vec::Zero(1)) ==
        doctest::Approx(0.01).epsilon(1e-12));

  FeederModel big = load_feeder(std::string(DSIM_DATA_DIR) + "/feeder15.json");
  SensitivityBundle sb = build_sensitivity(big);
  RngStream rng(11, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Vec p(big.n()), q(big.n());
    for (int i = 0; i < big.n(); ++i) {
      p[i] = rng.uniform(-2, 2);
      q[i] = rng.uniform(-2, 2);
    }
    const double loss = losses_quadratic(sb, p, q);
    CHECK(loss >= 0.0);
    // Substation injection consistency against the direct expression.
    CHECK(substation_injection(sb, p, q) == doctest::Approx(-p.sum() + loss));
    // Same quadratic via line flows.
    auto [pf, qf] = line_flows(sb, p, q);
    double direct = 0.0;
    for (int l = 0; l < big.n(); ++l)
      direct += big.lines[l].r_pu * (pf[l] * pf[l] + qf[l] * qf[l]);
    CHECK(loss == doctest::Approx(direct).epsilon(1e-10));
  }
}
