#include "doctest.h"
#include "dsim/config.hpp"

TEST_CASE("placeholder") { CHECK(true); }
