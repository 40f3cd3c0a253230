#include <doctest.h>

#include <cmath>
#include <vector>

#include "falconer/errors.hpp"
#include "falconer/measures.hpp"
#include "falconer/microlocal.hpp"
#include "falconer/random.hpp"
#include "oracles.hpp"

using namespace falconer;
using namespace falconer::microlocal;

namespace {

double phi_oracle(int d, int k, const std::vector<double>& p) {
  // Half the squared norm of (x,...,x) - (y_1,...,y_{k-1}) in R^{(k-1)d}.
  double acc = 0.0;
  for (int i = 1; i < k; ++i)
    for (int a = 0; a < d; ++a) acc += (p[a] - p[i * d + a]) * (p[a] - p[i * d + a]);
  return 0.5 * acc;
}

ConormalParameters example_params() {
  ConormalParameters p;
  p.x0 = {0.0, 0.0};
  p.ybar = {0.6, 0.0};
  p.omega = {0.0, 1.0};
  p.tau = 1.0;
  return p;
}

}  // namespace

TEST_CASE("configuration function examples") {
  std::vector<double> same{0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
  CHECK(phi(2, 3, same) == 0.0);
  std::vector<double> corners{0.0, 0.0, 1.0, 0.0, 0.0, 1.0};
  CHECK(phi(2, 3, corners) == 1.0);

  Rng rng = make_stream(3, 0);
  for (int trial = 0; trial < 100; ++trial) {
    int d = 2 + trial % 3, k = 3 + trial % 4;
    std::vector<double> p(d * k);
    for (auto& v : p) v = uniform(rng, -2.0, 2.0);
    CHECK(phi(d, k, p) == doctest::Approx(phi_oracle(d, k, p)).epsilon(1e-15));
  }
}

TEST_CASE("conormal point worked example") {
  auto spec = threshold_spec(2, 3, 1.0);
  auto pt = conormal_point(spec, example_params());
  const double r = std::sqrt(2.0 - 0.36);
  CHECK(pt.radius == doctest::Approx(r).epsilon(1e-14));
  CHECK(pt.radius == doctest::Approx(1.2806).epsilon(1e-4));
  CHECK(pt.xi[0] == doctest::Approx(-0.6).epsilon(1e-14));
  CHECK(pt.xi[1] == doctest::Approx(-r).epsilon(1e-14));
  CHECK(std::abs(pt.xi[2] - 0.6) <= 1e-12);  // xi^1 = tau y^1
  CHECK(std::abs(pt.xi[3]) <= 1e-12);
  CHECK(std::abs(pt.xi[4]) <= 1e-12);  // xi^2 = tau r omega
  CHECK(std::abs(pt.xi[5] - r) <= 1e-12);
  CHECK(std::abs(phi(2, 3, pt.x) - 1.0) <= 1e-10);
}

TEST_CASE("conormal points lie on the level set and scale conically") {
  for (int k : {3, 4, 5, 6}) {
    auto spec = threshold_spec(2, k, 0.8);
    Rng rng = make_stream(17, static_cast<std::uint64_t>(k));
    for (int trial = 0; trial < 30; ++trial) {
      auto params = sample_parameters(spec, rng);
      auto pt = conormal_point(spec, params);
      CHECK(std::abs(phi(2, k, pt.x) - 0.8) <= 1e-10);
      // xi^0 = -(sum of the other xi), since the form is a function of differences.
      for (int a = 0; a < 2; ++a) {
        double acc = 0.0;
        for (int i = 0; i < k; ++i) acc += pt.xi[i * 2 + a];
        CHECK(std::abs(acc) <= 1e-12);
      }
      auto doubled = params;
      doubled.tau *= 2.0;
      auto pt2 = conormal_point(spec, doubled);
      for (std::size_t c = 0; c < pt.xi.size(); ++c) CHECK(pt2.xi[c] == 2.0 * pt.xi[c]);
      CHECK(pt2.x == pt.x);
    }
  }
}

TEST_CASE("points outside U_t are rejected") {
  auto spec = threshold_spec(2, 3, 1.0);
  auto p = example_params();
  p.ybar = {1.5, 0.0};  // |y|^2 > 2t
  CHECK_THROWS_AS(conormal_point(spec, p), DomainError);
  p.ybar = {0.0, 0.0};
  CHECK_THROWS_AS(conormal_point(spec, p), DomainError);
  auto spec4 = threshold_spec(2, 4, 1.0);
  auto q = example_params();
  q.ybar = {0.3, 0.2, 0.3, 0.2};  // y^1 = y^2
  CHECK_THROWS_AS(conormal_point(spec4, q), DomainError);
}

TEST_CASE("finite differences match the closed-form k = 3 Jacobian") {
  for (int d : {2, 3}) {
    auto spec = threshold_spec(d, 3, 1.0);
    Rng rng = make_stream(23, static_cast<std::uint64_t>(d));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      auto params = sample_parameters(spec, rng);
      auto jac = jacobian_pi_L(spec, params);
      Eigen::MatrixXd frame = tangent_frame(params.omega);
      std::vector<std::vector<double>> frame_vectors(d - 1, std::vector<double>(d));
      for (int c = 0; c < d - 1; ++c)
        for (int a = 0; a < d; ++a) frame_vectors[c][a] = frame(a, c);
      auto ref = oracle::k3_analytic_jacobian(d, params.ybar, params.omega, frame_vectors,
                                              params.tau, spec.t);
      REQUIRE(jac.rows() == 2 * d);
      REQUIRE(jac.cols() == 3 * d);
      for (int i = 0; i < 2 * d; ++i)
        for (int j = 0; j < 3 * d; ++j) worst = std::max(worst, std::abs(jac(i, j) - ref[i][j]));
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("linear entries of the Jacobian are exact") {
  // Left = {1}: xi^1 = tau y^1 is linear, so central differences are exact.
  auto spec = make_spec(2, 3, 1.0, "1|02");
  Rng rng = make_stream(29, 0);
  for (int trial = 0; trial < 20; ++trial) {
    auto params = sample_parameters(spec, rng);
    auto jac = jacobian_pi_L(spec, params);
    for (int a = 0; a < 2; ++a) {
      // rows 2, 3 hold xi^1; y^1 occupies parameter columns 2, 3; tau the last.
      for (int b = 0; b < 2; ++b) CHECK(std::abs(jac(2 + a, 2 + b) - (a == b ? params.tau : 0.0)) <= 1e-7);
      CHECK(std::abs(jac(2 + a, 5) - params.ybar[a]) <= 1e-7);
    }
  }
}

TEST_CASE("tangent frame is orthonormal and orthogonal to omega") {
  std::vector<double> omega{0.2, -0.4, 0.5, std::sqrt(1.0 - 0.04 - 0.16 - 0.25)};
  Eigen::MatrixXd e = tangent_frame(omega);
  REQUIRE(e.rows() == 4);
  REQUIRE(e.cols() == 3);
  Eigen::Map<const Eigen::VectorXd> w(omega.data(), 4);
  CHECK((e.transpose() * e - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-14);
  CHECK((e.transpose() * w).norm() <= 1e-14);
}

TEST_CASE("k = 3 determinant stays away from zero") {
  auto spec = threshold_spec(2, 3, 1.0);
  Rng rng = make_stream(31, 0);
  for (int trial = 0; trial < 100; ++trial) {
    auto params = sample_parameters(spec, rng);
    CHECK(std::abs(k3_determinant(spec, params)) > 1e-8);
  }
  // Closed form: |det| = |tau|^d r^{d-1} |omega.(y + r omega)|, which is r^2 at the worked example.
  CHECK(std::abs(std::abs(k3_determinant(spec, example_params())) - 1.64) <= 1e-7);
}

TEST_CASE("rank is invariant under tau scaling") {
  auto spec = threshold_spec(2, 4, 1.0);
  Rng rng = make_stream(37, 0);
  for (int trial = 0; trial < 20; ++trial) {
    auto params = sample_parameters(spec, rng);
    int base = numerical_rank(jacobian_pi_L(spec, params), 1e-8);
    for (double lambda : {0.5, 2.0, 10.0}) {
      auto scaled = params;
      scaled.tau *= lambda;
      CHECK(numerical_rank(jacobian_pi_L(spec, scaled), 1e-8) == base);
    }
  }
}

TEST_CASE("rank lower bounds hold at every sample") {
  struct Case {
    int d, k, bound;
  };
  for (auto c : {Case{2, 3, 4}, Case{2, 4, 7}, Case{3, 4, 10}, Case{2, 5, 7}, Case{2, 6, 9}}) {
    auto spec = threshold_spec(c.d, c.k);
    REQUIRE(rank_bound(spec).has_value());
    CHECK(*rank_bound(spec) == c.bound);
    auto report = rank_check(spec, 25, 1e-8, 5);
    for (const auto& s : report.samples) CHECK(s.rank >= c.bound);
    CHECK(report.pass());
    if (c.k == 3) CHECK(report.min_rank == 4);
  }
  CHECK_FALSE(rank_bound(make_spec(2, 4, 1.0, "0|123")).has_value());
}

TEST_CASE("threshold splits") {
  CHECK(threshold_spec(2, 3).partition_string() == "0|12");
  CHECK(threshold_spec(2, 4).partition_string() == "01|23");
  CHECK(threshold_spec(2, 5).partition_string() == "01|234");
  CHECK(threshold_spec(2, 6).partition_string() == "012|345");
  CHECK(threshold_spec(2, 7).partition_string() == "012|3456");
}

TEST_CASE("partition parsing") {
  std::vector<int> l, r;
  parse_partition("0,1|2,3", 4, l, r);
  CHECK(l == std::vector<int>{0, 1});
  CHECK(r == std::vector<int>{2, 3});
  CHECK_THROWS_AS(make_spec(2, 4, 1.0, "01|2"), ConfigurationError);     // 3 missing
  CHECK_THROWS_AS(make_spec(2, 4, 1.0, "01|123"), ConfigurationError);   // 1 twice
  CHECK_THROWS_AS(make_spec(2, 4, 1.0, "|0123"), ConfigurationError);    // empty left
  CHECK_THROWS_AS(make_spec(2, 4, 1.0, "0123"), ConfigurationError);     // no bar
  CHECK_THROWS_AS(make_spec(2, 4, 1.0, "01|2x"), ConfigurationError);
  CHECK_THROWS_AS(make_spec(2, 4, 1.0, "01|24"), ConfigurationError);    // out of range
  CHECK_THROWS_AS(make_spec(1, 3, 1.0, "0|12"), ConfigurationError);
  CHECK_THROWS_AS(make_spec(2, 3, 0.0, "0|12"), ConfigurationError);
}

TEST_CASE("corank and derivative loss") {
  auto c4 = corank_and_loss(threshold_spec(2, 4), 7);
  CHECK(c4.corank == 1);
  CHECK(c4.corank <= (4 - 2) * 2 / 2 - 1);
  CHECK(c4.beta == doctest::Approx(0.5));
  CHECK(c4.loss == doctest::Approx(1.0));
  auto c3 = corank_and_loss(threshold_spec(2, 3), 4);
  CHECK(c3.corank == 0);
  auto c5 = corank_and_loss(threshold_spec(2, 5), 7);
  CHECK(c5.corank <= (5 - 3) * 2 / 2 - 1);
}

TEST_CASE("exact thresholds") {
  CHECK(threshold(2, 3, ThresholdVariant::fio).str() == "5/3");
  CHECK(threshold(2, 4, ThresholdVariant::fio).str() == "3/2");
  CHECK(threshold(2, 4, ThresholdVariant::bilinear).str() == "7/4");
  for (int d = 2; d <= 6; ++d) {
    CHECK(threshold(d, 3, ThresholdVariant::fio) == Rational(2 * d + 1, 3));
    for (int k = 4; k <= 10; ++k) {
      CHECK(threshold(d, k, ThresholdVariant::bilinear) - threshold(d, k, ThresholdVariant::fio) ==
            Rational(1, k));
      if (k > 4)
        CHECK(threshold(d, k - 1, ThresholdVariant::fio) < threshold(d, k, ThresholdVariant::fio));
    }
  }
  CHECK(Rational(4, 2).str() == "2/1");
  CHECK(Rational(3, -6).str() == "-1/2");
  CHECK_THROWS_AS(threshold(1, 3, ThresholdVariant::fio), DomainError);
  CHECK_THROWS_AS(threshold(2, 2, ThresholdVariant::fio), DomainError);
}

TEST_CASE("zero perturbation reproduces the Euclidean check exactly") {
  auto spec = threshold_spec(2, 4);
  auto base = rank_check(spec, 20, 1e-8, 9);
  auto a = random_symmetric((spec.k - 1) * spec.d, 4);
  auto pert = perturbed_rank_check(spec, 0.0, a, 20, 1e-8, 9);
  REQUIRE(base.samples.size() == pert.samples.size());
  for (std::size_t s = 0; s < base.samples.size(); ++s) {
    CHECK(base.samples[s].rank == pert.samples[s].rank);
    CHECK(base.samples[s].sigma_max == pert.samples[s].sigma_max);
  }
}

TEST_CASE("small perturbation keeps the level set and the bound") {
  auto spec = threshold_spec(2, 4);
  auto a = random_symmetric(6, 2);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  CHECK(svd.singularValues()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((a - a.transpose()).norm() == 0.0);
  auto form = make_perturbation(1e-3, a);
  Rng rng = make_stream(41, 0);
  auto params = sample_parameters(spec, rng);
  auto pt = conormal_point(spec, params, form);
  // Perturbed Phi: 1/2 D^T Q D with D the stacked differences x^0 - x^i.
  Eigen::VectorXd diff(6);
  for (int i = 1; i < 4; ++i)
    for (int c = 0; c < 2; ++c) diff[(i - 1) * 2 + c] = pt.x[c] - pt.x[i * 2 + c];
  CHECK(0.5 * diff.dot(form.matrix(6) * diff) == doctest::Approx(spec.t).epsilon(1e-10));
  CHECK(perturbed_rank_check(spec, 1e-3, a, 20, 1e-8, 3).pass());
}

TEST_CASE("perturbation limits") {
  auto a = random_symmetric(4, 1);
  CHECK_THROWS_AS(make_perturbation(0.1, a), DomainError);
  CHECK_THROWS_AS(make_perturbation(-0.01, a), DomainError);
  CHECK_THROWS_AS(make_perturbation(0.01, 2.0 * a), DomainError);
  CHECK_NOTHROW(make_perturbation(0.05, a));
  // A degenerate form bypassing the size check has no level-set root.
  QuadraticForm flat{1.0, -Eigen::MatrixXd::Identity(4, 4)};
  auto p = example_params();
  CHECK_THROWS_AS(conormal_point(threshold_spec(2, 3), p, flat), PerturbationError);
}

TEST_CASE("base point search") {
  auto cloud = measures::sample_self_similar(measures::build_cantor_dust(2, 1.0 / 3.0, 4), 2000, 20, 2);
  auto bp = find_base_point(cloud, 4, 7);
  REQUIRE(bp.points.size() == 8);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      CHECK(std::hypot(bp.points[2 * i] - bp.points[2 * j],
                       bp.points[2 * i + 1] - bp.points[2 * j + 1]) >= 0.01);
  CHECK(bp.t0 == doctest::Approx(phi_oracle(2, 4, bp.points)).epsilon(1e-15));
  measures::DiscreteMeasure atom(2, {0.0, 0.0}, {1.0});
  CHECK_THROWS_AS(find_base_point(atom, 3, 1, 0.01, 50), SamplingError);
}
