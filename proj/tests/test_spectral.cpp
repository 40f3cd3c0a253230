#include <doctest.h>

#include <cmath>
#include <vector>

#include "falconer/bessel.hpp"
#include "falconer/errors.hpp"
#include "falconer/fit.hpp"
#include "falconer/measures.hpp"
#include "falconer/spectral.hpp"
#include "oracles.hpp"

using namespace falconer;
using namespace falconer::spectral;
using measures::DiscreteMeasure;

namespace {
constexpr double kPi = oracle::kPi;

double max_abs_diff(const SpectralField& a, const SpectralField& b) {
  double worst = 0.0;
  for (std::size_t f = 0; f < a.values.size(); ++f)
    worst = std::max(worst, std::abs(a.values[f] - b.values[f]));
  return worst;
}
}  // namespace

TEST_CASE("point mass at the origin transforms to its weight") {
  DiscreteMeasure m(2, {0.0, 0.0}, {0.7});
  auto field = measure_fourier(m, make_lattice(2, 3.0, 0.5));
  for (auto v : field.values) {
    CHECK(v.real() == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(std::abs(v.imag()) <= 1e-14);
  }
}

TEST_CASE("two-point measure matches the closed form") {
  const double a1 = 0.3, a2 = -0.8;
  DiscreteMeasure m(2, {0.0, 0.0, a1, a2}, {0.5, 0.5});
  auto lat = make_lattice(2, 4.0, 0.25);
  auto field = measure_fourier(m, lat);
  std::vector<int> node(2);
  for (std::size_t f = 0; f < lat.size(); ++f) {
    lat.node(f, node);
    double phase = -2.0 * kPi * (a1 * node[0] + a2 * node[1]) * lat.spacing;
    Complex expect = 0.5 * (1.0 + std::polar(1.0, phase));
    CHECK(std::abs(field.values[f] - expect) <= 1e-12);
  }
  CHECK(field.hermitian_defect() <= 1e-12);
}

TEST_CASE("product formula equals the enumerated cylinder sum") {
  auto ifs = measures::build_cantor_dust(2, 1.0 / 3.0, 4);
  auto lat = make_lattice(2, 6.0, 0.5);
  auto direct = measure_fourier(measures::enumerate_self_similar(ifs, 5), lat);
  auto product = self_similar_fourier(ifs, 5, lat);
  CHECK(max_abs_diff(direct, product) <= 1e-11);
}

TEST_CASE("lattice bookkeeping") {
  auto lat = make_lattice(3, 2.0, 0.5);
  CHECK(lat.half == 4);
  CHECK(lat.size() == 729);
  std::vector<int> node(3);
  for (std::size_t f = 0; f < lat.size(); f += 37) {
    lat.node(f, node);
    CHECK(lat.flat(node) == f);
    for (auto& v : node) v = -v;
    CHECK(lat.flat(node) == lat.mirror(f));
  }
  CHECK_THROWS_AS(make_lattice(9, 1.0, 0.5), ConfigurationError);
  CHECK_THROWS_AS(make_lattice(2, -1.0, 0.5), ConfigurationError);
}

TEST_CASE("sphere transform values at the origin") {
  CHECK(sphere_surface_ft(4, 0.0) == doctest::Approx(2.0 * kPi * kPi).epsilon(1e-14));
  CHECK(sphere_surface_ft(2, 0.0) == doctest::Approx(2.0 * kPi).epsilon(1e-14));
  CHECK(sphere_surface_ft(3, 0.0) == doctest::Approx(4.0 * kPi).epsilon(1e-14));
  for (int n = 2; n <= 7; ++n)
    CHECK(sphere_surface_ft(n, 0.0) == doctest::Approx(sphere_area(n)).epsilon(1e-13));
}

TEST_CASE("sphere transform in R^3 is 2 sin(2 pi rho) / rho") {
  for (double rho : {0.01, 0.37, 1.0, 3.3, 3.9, 4.1, 10.0, 57.3, 400.0}) {
    double expect = 2.0 * std::sin(2.0 * kPi * rho) / rho;
    // Series cancellation just below the switch limits accuracy to about 1e-10.
    CHECK(std::abs(sphere_surface_ft(3, rho) - expect) <= 1e-9);
  }
}

TEST_CASE("radius scaling") {
  std::vector<double> zero{0.0, 0.0, 0.0, 0.0};
  CHECK(scaled_sphere_ft(4, 2.0, zero) == doctest::Approx(16.0 * kPi * kPi).epsilon(1e-13));
  std::vector<double> xi{0.3, 0.4};
  CHECK(scaled_sphere_ft(2, 1.5, xi) ==
        doctest::Approx(1.5 * sphere_surface_ft(2, 0.75)).epsilon(1e-14));
  CHECK_THROWS_AS(sphere_surface_ft(1, 1.0), DomainError);
  CHECK_THROWS_AS(sphere_surface_ft(3, -1.0), DomainError);
}

TEST_CASE("bessel agrees with the standard library") {
  for (double nu : {0.0, 0.5, 1.0, 1.5, 2.0, 3.5})
    for (double x : {0.0, 0.1, 1.0, 5.0, 12.5, 24.9, 25.1, 40.0, 150.0, 1000.0, 12566.0}) {
      double ref = std::cyl_bessel_j(nu, x);
      CHECK(std::abs(bessel_j(nu, x) - ref) <= 1e-10);
    }
}

TEST_CASE("series and Hankel branches meet at the switch") {
  for (double nu : {0.0, 0.5, 1.0, 2.0, 3.0}) {
    CHECK(std::abs(bessel_j_series(nu, kBesselSwitch) - bessel_j_hankel(nu, kBesselSwitch)) <= 1e-9);
    CHECK(std::abs(bessel_j(nu, kBesselSwitch - 1e-12) - bessel_j(nu, kBesselSwitch + 1e-12)) <= 1e-9);
  }
  CHECK(bessel_j_scaled(1.0, 0.0) == doctest::Approx(1.0));
  CHECK(bessel_j_scaled(2.0, 0.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(bessel_j(-1.0, 1.0), DomainError);
}

TEST_CASE("envelope decay rates of the sphere transform") {
  auto envelope_slope = [](int n) {
    std::vector<double> rho, val;
    for (double r = 20.0; r <= 2000.0; r += 0.01) {
      rho.push_back(r);
      val.push_back(sphere_surface_ft(n, r));
    }
    auto peaks = local_maxima(rho, val);
    std::vector<double> px, py;
    for (auto [x, y] : peaks) {
      px.push_back(x);
      py.push_back(y);
    }
    return fit_loglog(px, py).slope;
  };
  CHECK(std::abs(envelope_slope(4) + 1.5) <= 0.02);
  CHECK(std::abs(envelope_slope(2) + 0.5) <= 0.02);
}

TEST_CASE("Littlewood-Paley cutoffs sum to one") {
  for (double rho = 0.0; rho <= 256.0; rho += 0.173) {
    double total = 0.0;
    for (int j = 0; j <= 8; ++j) total += lp_cutoff(j, rho);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(lp_ramp(0.5) == 1.0);
  CHECK(lp_ramp(2.5) == 0.0);
  CHECK(lp_cutoff(3, 2.0) == 0.0);
  CHECK(lp_cutoff(3, 16.5) == 0.0);
}

TEST_CASE("band decomposition sums back to the field") {
  auto ifs = measures::build_cantor_dust(2, 1.0 / 3.0, 4);
  auto field = self_similar_fourier(ifs, 6, make_lattice(2, 32.0, 0.5));
  auto bands = littlewood_paley(field, 4);
  REQUIRE(bands.size() == 5);
  std::vector<int> node(2);
  for (std::size_t f = 0; f < field.values.size(); ++f) {
    field.lattice.node(f, node);
    double rho = field.lattice.spacing * std::hypot(node[0], node[1]);
    if (rho > 16.0) continue;
    Complex acc = 0.0;
    for (const auto& b : bands) acc += b.field.values[f];
    CHECK(std::abs(acc - field.values[f]) <= 1e-13);
  }
  CHECK_THROWS_AS(littlewood_paley(field, 5), ConfigurationError);
}

TEST_CASE("grid FFT satisfies discrete Plancherel exactly") {
  measures::DiscreteMeasure m(2, {0.1, -0.2, 0.4, 0.3}, {0.3, 0.7});
  auto g = measures::mollify_to_grid(m, 41, 0.3);
  auto field = grid_fourier(g);
  double spatial = 0.0;
  for (double v : g.values) spatial += v * v;
  spatial *= g.cell * g.cell;
  CHECK(field.l2_norm() * field.l2_norm() == doctest::Approx(spatial).epsilon(1e-12));
  CHECK(field.values[field.lattice.origin()].real() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("grid FFT agrees with the direct sum over cells") {
  measures::DiscreteMeasure m(1, {0.25}, {1.0});
  auto g = measures::mollify_to_grid(m, 31, 0.4);
  auto fft = grid_fourier(g);
  std::vector<double> coords, weights;
  for (std::size_t f = 0; f < g.values.size(); ++f) {
    coords.push_back(g.centre(f)[0]);
    weights.push_back(g.values[f] * g.cell);
  }
  auto direct = measure_fourier(measures::DiscreteMeasure(1, coords, weights), fft.lattice);
  CHECK(max_abs_diff(fft, direct) <= 1e-12);
  CHECK_THROWS_AS(grid_fourier(measures::mollify_to_grid(m, 30, 0.4)), ConfigurationError);
}

TEST_CASE("spatial energy examples") {
  DiscreteMeasure pair(2, {0.0, 0.0, 1.0, 0.0}, {0.5, 0.5});
  CHECK(energy_spatial(pair, 0.5) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(energy_spatial(pair, 1.5) == doctest::Approx(0.5).epsilon(1e-14));

  DiscreteMeasure single(2, {0.3, 0.3}, {1.0});
  CHECK(energy_spatial(single, 1.0) == 0.0);

  DiscreteMeasure zero(2, {0.0, 0.0, 0.5, 0.5}, {0.0, 0.0});
  CHECK(energy_spatial(zero, 1.0) == 0.0);

  auto cloud = measures::sample_self_similar(measures::build_cantor_dust(2, 0.25, 4), 300, 20, 4);
  double prev = 0.0;
  for (double s : {0.2, 0.5, 0.9, 1.3, 1.7}) {
    double e = energy_spatial(cloud, s);
    CHECK(e > prev);  // all distances below 1
    prev = e;
  }
  for (double lambda : {0.5, 3.0})
    CHECK(energy_spatial(cloud.dilated(lambda), 0.8) ==
          doctest::Approx(std::pow(lambda, -0.8) * energy_spatial(cloud, 0.8)).epsilon(1e-12));

  CHECK_THROWS_AS(energy_spatial(pair, 0.0), DomainError);
  CHECK_THROWS_AS(energy_spatial(pair, 2.0), DomainError);
}

TEST_CASE("Riesz constant in one dimension") {
  // pi^{s - 1/2} Gamma((1-s)/2) / Gamma(s/2) at s = 1/2 equals 1.
  CHECK(riesz_constant(1, 0.5) == doctest::Approx(1.0).epsilon(1e-14));
  double s = 0.3;
  CHECK(riesz_constant(1, s) ==
        doctest::Approx(std::pow(kPi, s - 0.5) * std::tgamma((1 - s) / 2) / std::tgamma(s / 2))
            .epsilon(1e-14));
}

TEST_CASE("frequency energy of a Gaussian matches its closed form") {
  // mu = N(0, sigma^2) in R: I_s = E|Z|^{-s} with Z ~ N(0, 2 sigma^2), i.e.
  // (2 sigma^2)^{-s/2} 2^{-s/2} Gamma((1-s)/2) / sqrt(pi); mu^ = exp(-2 pi^2 sigma^2 xi^2).
  const double sigma = 0.3;
  auto lat = make_lattice(1, 20.0, 0.01);
  SpectralField field{lat, std::vector<Complex>(lat.size())};
  std::vector<int> node(1);
  for (std::size_t f = 0; f < lat.size(); ++f) {
    lat.node(f, node);
    double xi = node[0] * lat.spacing;
    field.values[f] = std::exp(-2.0 * kPi * kPi * sigma * sigma * xi * xi);
  }
  for (double s : {0.3, 0.5, 0.7}) {
    double exact = std::pow(2.0 * sigma * sigma, -s / 2.0) * std::pow(2.0, -s / 2.0) *
                   std::tgamma((1.0 - s) / 2.0) / std::sqrt(kPi);
    auto e = energy_frequency(field, s);
    CHECK(e.normalized() == doctest::Approx(exact).epsilon(1e-3));
    CHECK(e.gamma == riesz_constant(1, s));
  }
  CHECK_THROWS_AS(energy_frequency(field, 1.0), DomainError);
}
