#include "falconer/bessel.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "falconer/errors.hpp"

namespace falconer::spectral {

namespace {

// sum_k (-1)^k (x/2)^{2k} / (k! Gamma(k+nu+1)), accumulated in extended
// precision: near the switch point the terms reach ~1e9 while the sum is O(1).
long double scaled_series(double nu, double x) {
  const long double q = 0.25L * static_cast<long double>(x) * x;
  long double term = 1.0L / std::tgamma(static_cast<long double>(nu) + 1.0L);
  long double sum = term;
  for (int k = 1; k < 500; ++k) {
    term *= -q / (static_cast<long double>(k) * (k + static_cast<long double>(nu)));
    sum += term;
    if (k > 0.5 * x && std::fabs(term) <= std::numeric_limits<long double>::epsilon() * std::fabs(sum))
      break;
  }
  return sum;
}

// Hankel expansion J_nu(x) ~ sqrt(2/(pi x)) (P cos chi - Q sin chi),
// truncated at the smallest term.
double hankel(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double p = 1.0, q = 0.0;
  double term = 1.0;
  double last = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 200; ++k) {
    double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (k * 8.0 * x);
    double mag = std::abs(term);
    if (mag == 0.0) break;  // half-integer order: the expansion terminates
    if (mag > last) break;
    last = mag;
    // a_k / x^k enters P (k even) or Q (k odd) with sign (-1)^{floor(k/2)}
    double signed_term = ((k / 2) % 2 == 0) ? term : -term;
    (k % 2 == 0 ? p : q) += signed_term;
    if (mag < 1e-17 * std::abs(p)) break;
  }
  const double chi = x - (0.5 * nu + 0.25) * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

void check_args(double nu, double x) {
  if (!(nu >= 0.0)) throw DomainError("bessel_j: order must be nonnegative");
  if (!(x >= 0.0)) throw DomainError("bessel_j: argument must be nonnegative");
}

}  // namespace

double bessel_j_series(double nu, double x) {
  check_args(nu, x);
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  return static_cast<double>(scaled_series(nu, x) *
                             std::pow(0.5L * static_cast<long double>(x), static_cast<long double>(nu)));
}

double bessel_j_hankel(double nu, double x) {
  check_args(nu, x);
  if (x == 0.0) throw DomainError("bessel_j_hankel: argument must be positive");
  return hankel(nu, x);
}

double bessel_j(double nu, double x) {
  return x < kBesselSwitch ? bessel_j_series(nu, x) : bessel_j_hankel(nu, x);
}

double bessel_j_scaled(double nu, double x) {
  check_args(nu, x);
  if (x < kBesselSwitch) return static_cast<double>(scaled_series(nu, x));
  return hankel(nu, x) / std::pow(0.5 * x, nu);
}

}  // namespace falconer::spectral
