#include <cmath>

#include "doctest.h"
#include "dsim/rng.hpp"

using namespace dsim;

TEST_CASE("philox4x32-10 known-answer vectors") {
  auto b0 = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  CHECK(b0[0] == 0x6627e8d5u);
  CHECK(b0[1] == 0xe169c58du);
  CHECK(b0[2] == 0xbc57ac4cu);
  CHECK(b0[3] == 0x9b00dbd8u);

  auto bf = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                              {0xffffffffu, 0xffffffffu});
  CHECK(bf[0] == 0x408f276du);
  CHECK(bf[1] == 0x41c83b0eu);
  CHECK(bf[2] == 0xa20bc7c6u);
  CHECK(bf[3] == 0x6d5451fdu);

  auto bp = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                              {0xa4093822u, 0x299f31d0u});
  CHECK(bp[0] == 0xd16cfe09u);
  CHECK(bp[1] == 0x94fdccebu);
  CHECK(bp[2] == 0x5001e420u);
  CHECK(bp[3] == 0x24126ea1u);
}

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool all_equal = true, differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const double ua = a.uniform();
    all_equal = all_equal && (ua == b.uniform());
    differs_stream = differs_stream || (ua != c.uniform());
    differs_seed = differs_seed || (ua != d.uniform());
  }
  CHECK(all_equal);
  CHECK(differs_stream);
  CHECK(differs_seed);
}

TEST_CASE("uniform range and mean") {
  RngStream rng(1, 0);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / 20000 - 0.5) < 0.01);
}

TEST_CASE("normal moments") {
  RngStream rng(2, 0);
  double sum = 0.0, sq = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 3.0 / std::sqrt(double(n)));
  CHECK(std::abs(sq / n - 1.0) < 0.03);
}

TEST_CASE("purpose separation yields disjoint draws") {
  RngStream a = make_stream(5, RngPurpose::kTraining, 3);
  RngStream b = make_stream(5, RngPurpose::kEvaluation, 3);
  bool differs = false;
  for (int i = 0; i < 16; ++i) differs = differs || (a.uniform() != b.uniform());
  CHECK(differs);
}
