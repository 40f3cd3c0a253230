#include <doctest.h>

#include <cmath>
#include <sstream>

#include "falconer/errors.hpp"
#include "falconer/measures.hpp"
#include "falconer/random.hpp"
#include "oracles.hpp"

using namespace falconer;
using namespace falconer::measures;

TEST_CASE("cantor dust dimensions follow the Moran closed form") {
  CHECK(similarity_dimension(build_cantor_dust(1, 1.0 / 3.0, 2)) ==
        doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(1e-12));
  CHECK(similarity_dimension(build_cantor_dust(2, 0.25, 4)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(similarity_dimension(build_cantor_dust(2, 1.0 / 3.0, 4)) ==
        doctest::Approx(1.26186).epsilon(1e-5));
}

TEST_CASE("cantor dust rejects impossible requests") {
  CHECK_THROWS_AS(build_cantor_dust(2, 0.6, 4), DomainError);
  CHECK_THROWS_AS(build_cantor_dust(2, 0.25, 5), ConfigurationError);
  CHECK_THROWS_AS(build_cantor_dust(1, 0.0, 2), DomainError);
}

TEST_CASE("cantor dust attractor sits in the unit cube") {
  auto ifs = build_cantor_dust(3, 0.4, 8);
  for (int a = 0; a < 3; ++a) {
    CHECK(ifs.bounding_box().lo[a] >= -1e-9);
    CHECK(ifs.bounding_box().hi[a] <= 1.0 + 1e-9);
  }
}

TEST_CASE("similarity dimension of unequal ratios") {
  IfsSystem single(1, {{0.5, {0.0}}}, {1.0});
  CHECK(similarity_dimension(single) == 0.0);

  IfsSystem two(1, {{0.5, {0.0}}, {0.25, {0.75}}}, {0.5, 0.5});
  double s = similarity_dimension(two);
  CHECK(s == doctest::Approx(std::log2((1.0 + std::sqrt(5.0)) / 2.0)).epsilon(1e-10));
  CHECK(std::abs(std::pow(0.5, s) + std::pow(0.25, s) - 1.0) <= 1e-10);
}

TEST_CASE("IFS constructor validates") {
  CHECK_THROWS_AS(IfsSystem(1, {{1.2, {0.0}}}, {1.0}), ConfigurationError);
  CHECK_THROWS_AS(IfsSystem(1, {{0.5, {0.0}}, {0.5, {0.5}}}, {0.5, 0.6}), ConfigurationError);
  CHECK_THROWS_AS(IfsSystem(2, {{0.5, {0.0}}}, {1.0}), ConfigurationError);
}

TEST_CASE("chaos game point lies in the middle-thirds set") {
  auto ifs = build_cantor_dust(1, 1.0 / 3.0, 2);
  auto m = sample_self_similar(ifs, 1, 40, 7);
  REQUIRE(m.size() == 1);
  // Doubles resolve about 33 ternary digits; 30 are checked exactly.
  double x = m.point(0)[0];
  for (int digit = 0; digit < 30; ++digit) {
    x *= 3.0;
    double dgt = std::floor(x + 1e-9);
    CHECK(dgt != 1.0);
    x -= dgt;
    if (x < 0.0) x = 0.0;
  }
}

TEST_CASE("chaos game sample has unit mass and stays in the box") {
  auto ifs = build_cantor_dust(2, 1.0 / 3.0, 4);
  auto m = sample_self_similar(ifs, 1000, 20, 3);
  CHECK(m.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(ifs.bounding_box().contains(m.point(i)));
}

TEST_CASE("chaos game is deterministic in the seed") {
  auto ifs = build_cantor_dust(2, 0.3, 3);
  auto a = sample_self_similar(ifs, 500, 25, 11);
  auto b = sample_self_similar(ifs, 500, 25, 11);
  auto c = sample_self_similar(ifs, 500, 25, 12);
  CHECK(a.coords() == b.coords());
  CHECK(a.weights() == b.weights());
  CHECK(a.coords() != c.coords());
}

TEST_CASE("box-count slope of the four-corner quarter dust is 1") {
  auto ifs = build_cantor_dust(2, 0.25, 4);
  auto m = sample_self_similar(ifs, 10000, 30, 1);
  std::vector<double> logs, logn;
  for (int k = 1; k <= 5; ++k) {
    double side = std::pow(4.0, -k);
    logs.push_back(-std::log(side));
    logn.push_back(std::log(static_cast<double>(oracle::box_count(m.coords(), 2, side))));
  }
  CHECK(std::abs(oracle::slope(logs, logn) - 1.0) <= 0.1);
}

TEST_CASE("enumeration weights and point count") {
  auto ifs = build_cantor_dust(1, 1.0 / 3.0, 2);
  auto m = enumerate_self_similar(ifs, 6);
  CHECK(m.size() == 64);
  CHECK(m.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bump integrates to one") {
  // d = 2: int_0^1 c (1 - r^2)^2 2 pi r dr with c from the closed form.
  double total = oracle::integrate(
      [](double r) {
        double x[2] = {r, 0.0};
        return bump(x) * 2.0 * oracle::kPi * r;
      },
      0.0, 1.0, 40);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  double outside[2] = {1.0, 0.5};
  CHECK(bump(outside) == 0.0);
}

TEST_CASE("mollified point mass is symmetric about the grid centre") {
  DiscreteMeasure m(2, {0.0, 0.0}, {1.0});
  auto g = mollify_to_grid(m, 41, 0.2);
  const int n = g.size;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = g.values[i * n + j];
      CHECK(v == doctest::Approx(g.values[(n - 1 - i) * n + j]).epsilon(1e-12));
      CHECK(v == doctest::Approx(g.values[i * n + (n - 1 - j)]).epsilon(1e-12));
      CHECK(v == doctest::Approx(g.values[j * n + i]).epsilon(1e-12));
    }
  CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("mollification conserves mass on random inputs") {
  Rng rng = make_stream(5, 0);
  for (int trial = 0; trial < 100; ++trial) {
    int atoms = 1 + static_cast<int>(uniform01(rng) * 6);
    std::vector<double> coords, weights;
    for (int a = 0; a < atoms; ++a) {
      coords.push_back(uniform(rng, -1.0, 1.0));
      coords.push_back(uniform(rng, -1.0, 1.0));
      weights.push_back(uniform(rng, 0.1, 1.0));
    }
    DiscreteMeasure m(2, coords, weights);
    auto g = mollify_to_grid(m, 33, 0.3);
    CHECK(std::abs(g.mass() - m.total_mass()) <= 1e-8 * m.total_mass());
  }
}

TEST_CASE("mollification is linear in the measure") {
  std::vector<double> origin{-2.0, -2.0};
  const double cell = 0.05;
  DiscreteMeasure a(2, {-1.0, -1.0}, {0.4}, Box{{-2, -2}, {2, 2}});
  DiscreteMeasure b(2, {1.0, 0.5}, {0.6}, Box{{-2, -2}, {2, 2}});
  DiscreteMeasure both(2, {-1.0, -1.0, 1.0, 0.5}, {0.4, 0.6}, Box{{-2, -2}, {2, 2}});
  auto ga = mollify_to_grid(a, 81, 0.2, origin, cell);
  auto gb = mollify_to_grid(b, 81, 0.2, origin, cell);
  auto gab = mollify_to_grid(both, 81, 0.2, origin, cell);
  for (std::size_t f = 0; f < gab.values.size(); ++f)
    CHECK(gab.values[f] == doctest::Approx(ga.values[f] + gb.values[f]).epsilon(1e-12));
}

TEST_CASE("mollification errors") {
  DiscreteMeasure m(1, {0.9}, {1.0});
  CHECK_THROWS_AS(mollify_to_grid(m, 21, 0.3, {-1.0}, 0.1), DomainError);  // support escapes
  CHECK_THROWS_AS(mollify_to_grid(m, 21, 0.1, {-1.0}, 0.1), DomainError);  // unresolved bump
}

TEST_CASE("measure CSV round trip is exact") {
  auto m = sample_self_similar(build_cantor_dust(2, 0.3, 4), 50, 12, 9);
  std::stringstream ss;
  write_measure_csv(ss, m);
  CHECK(ss.str().rfind("# d=2 mass=", 0) == 0);
  auto back = read_measure_csv(ss);
  CHECK(back.coords() == m.coords());
  CHECK(back.weights() == m.weights());
}

TEST_CASE("IFS config round trip and key suggestions") {
  auto ifs = build_cantor_dust(2, 0.25, 3);
  auto back = ifs_from_config(ifs_to_config(ifs));
  REQUIRE(back.size() == ifs.size());
  for (std::size_t i = 0; i < ifs.size(); ++i) {
    CHECK(back.maps()[i].ratio == ifs.maps()[i].ratio);
    CHECK(back.maps()[i].offset == ifs.maps()[i].offset);
    CHECK(back.weights()[i] == ifs.weights()[i]);
  }
  try {
    ifs_from_config("d = 1\nratio = 0.5\noffsets = 0\nweights = 1\n");
    FAIL("expected an unknown-key error");
  } catch (const ConfigurationError& e) {
    CHECK(std::string(e.what()).find("ratios") != std::string::npos);
  }
}
