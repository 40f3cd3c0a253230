#pragma once

namespace falconer::spectral {

/// Argument at which Bessel evaluation switches from the ascending power
/// series to the Hankel asymptotic expansion.
inline constexpr double kBesselSwitch = 25.0;

/// J_nu(x) for nu >= 0, x >= 0.
double bessel_j(double nu, double x);

/// (x/2)^{-nu} J_nu(x); equals 1/Gamma(nu+1) at x = 0.
double bessel_j_scaled(double nu, double x);

/// Branch-explicit evaluators (exposed for the continuity check at the
/// switch point).
double bessel_j_series(double nu, double x);
double bessel_j_hankel(double nu, double x);

}  // namespace falconer::spectral
