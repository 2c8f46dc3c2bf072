#include <cmath>
#include <vector>

#include "core/rng.hpp"
#include "doctest.h"

using tokforge::RngStream;

TEST_CASE("identical seeds give identical streams") {
  RngStream a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("child streams with distinct labels or indices differ") {
  CHECK(tokforge::child_seed(7, "a", 0) != tokforge::child_seed(7, "b", 0));
  CHECK(tokforge::child_seed(7, "a", 0) != tokforge::child_seed(7, "a", 1));
  CHECK(tokforge::child_seed(7, "a", 3) == tokforge::child_seed(7, "a", 3));
}

TEST_CASE("uniform draws land in [0,1)") {
  RngStream r(99);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("gaussian moments match the standard normal within 3 standard errors") {
  RngStream r(2024);
  const int n = 100000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.gaussian();
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  // SE(mean) = 1/sqrt(n); SE(var) ~ sqrt(2/n) for the normal.
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("next_below stays in range and covers small supports") {
  RngStream r(5);
  std::vector<int> seen(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto k = r.next_below(5);
    REQUIRE(k < 5);
    seen[static_cast<int>(k)]++;
  }
  for (int c : seen) CHECK(c > 0);
}
