#include <cmath>

#include "doctest.h"
#include "dsim/scenario.hpp"

using namespace dsim;

namespace {
ScenarioSpec small_spec() {
  ScenarioSpec spec;
  spec.p_mean_mw = Vec(2);
  spec.p_mean_mw << 1.0, 2.0;
  spec.q_mean_mvar = Vec(2);
  spec.q_mean_mvar << 0.5, 1.0;
  spec.pv_rating_mw = Vec::Constant(1, 2.0);
  spec.seed = 7;
  return spec;
}
}  // namespace

TEST_CASE("zero variance reproduces the means") {
  ScenarioSpec spec = small_spec();
  spec.load_std_factor = 0.0;
  RngStream rng = make_stream(spec.seed, RngPurpose::kTest, 0);
  Scenario s = sample(spec, rng);
  CHECK(s.p_load_mw[0] == doctest::Approx(1.0));
  CHECK(s.p_load_mw[1] == doctest::Approx(2.0));
  CHECK(s.q_load_mvar[1] == doctest::Approx(1.0));
}

TEST_CASE("degenerate solar factors reproduce the rating") {
  ScenarioSpec spec = small_spec();
  spec.solar_low_factor = 1.0;
  spec.solar_high_factor = 1.0;
  RngStream rng = make_stream(spec.seed, RngPurpose::kTest, 0);
  Scenario s = sample(spec, rng);
  CHECK(s.solar_avail_mw[0] == doctest::Approx(2.0));
}

TEST_CASE("same stream gives identical scenarios") {
  ScenarioSpec spec = small_spec();
  RngStream a = make_stream(spec.seed, RngPurpose::kTest, 5);
  RngStream b = make_stream(spec.seed, RngPurpose::kTest, 5);
  Scenario s1 = sample(spec, a);
  Scenario s2 = sample(spec, b);
  CHECK((s1.p_load_mw - s2.p_load_mw).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s1.q_load_mvar - s2.q_load_mvar).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s1.solar_avail_mw - s2.solar_avail_mw).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("expected scenario uses means and the midpoint solar factor") {
  ScenarioSpec spec = small_spec();
  Scenario s = expected_scenario(spec);
  CHECK(s.p_load_mw[0] == 1.0);
  CHECK(s.p_load_mw[1] == 2.0);
  CHECK(s.solar_avail_mw[0] == doctest::Approx(0.75 * 2.0));
  // Means are unaffected by the std factor.
  spec.load_std_factor = 0.5;
  Scenario s2 = expected_scenario(spec);
  CHECK(s2.p_load_mw[0] == s.p_load_mw[0]);
}

TEST_CASE("sampling statistics match the spec distributions") {
  ScenarioSpec spec = small_spec();
  const int n = 10000;
  Vec psum = Vec::Zero(2);
  double solar_sum = 0.0;
  uint64_t out_of_range = 0;
  std::atomic<uint64_t> truncations{0};
  for (int i = 0; i < n; ++i) {
    RngStream rng = make_stream(spec.seed, RngPurpose::kTest, uint64_t(i));
    Scenario s = sample(spec, rng, &truncations);
    psum += s.p_load_mw;
    solar_sum += s.solar_avail_mw[0];
    REQUIRE(s.p_load_mw.minCoeff() >= 0.0);
    if (s.solar_avail_mw[0] < 0.5 * 2.0 || s.solar_avail_mw[0] > 2.0) ++out_of_range;
  }
  // Load means within 3 standard errors.
  for (int b = 0; b < 2; ++b) {
    const double se = 0.2 * spec.p_mean_mw[b] / std::sqrt(double(n));
    CHECK(std::abs(psum[b] / n - spec.p_mean_mw[b]) < 3.0 * se);
  }
  // Solar mean within 3 standard errors of 0.75 x rating; all draws in range.
  const double solar_se = 2.0 * (0.5 / std::sqrt(12.0)) / std::sqrt(double(n));
  CHECK(std::abs(solar_sum / n - 1.5) < 3.0 * solar_se);
  CHECK(out_of_range == 0);
  // At sigma = 0.2 mu a negative draw is a 5-sigma event.
  CHECK(truncations.load() == 0);
}

TEST_CASE("pooled source resamples only pool members") {
  ScenarioSpec spec = small_spec();
  ScenarioSource source(spec, RngPurpose::kTraining);
  source.use_pool(4);
  REQUIRE(source.pool().size() == 4);
  for (uint64_t k = 1; k <= 50; ++k) {
    Scenario s = source.draw(k);
    bool found = false;
    for (const Scenario& member : source.pool())
      found = found || (s.p_load_mw == member.p_load_mw &&
                        s.solar_avail_mw == member.solar_avail_mw);
    CHECK(found);
  }
}

TEST_CASE("scenario spec validation") {
  ScenarioSpec spec = small_spec();
  spec.solar_low_factor = 0.8;
  spec.solar_high_factor = 0.6;
  CHECK_THROWS_AS(spec.validate(), FeederError);
  spec.solar_high_factor = 0.9;
  CHECK_NOTHROW(spec.validate());
  spec.load_std_factor = -0.1;
  CHECK_THROWS_AS(spec.validate(), FeederError);
}
