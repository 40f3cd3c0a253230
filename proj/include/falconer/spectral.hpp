#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "falconer/measures.hpp"

namespace falconer::spectral {

using Complex = std::complex<double>;

inline constexpr int kMaxLatticeDim = 8;

/// Regular frequency lattice {n * spacing : n in [-half, half]^dim}.
/// Node count per axis is 2*half+1, so the lattice is symmetric about 0.
struct Lattice {
  int dim = 1;
  int half = 0;
  double spacing = 1.0;

  int width() const { return 2 * half + 1; }
  std::size_t size() const;
  double extent() const { return half * spacing; }
  double cell_volume() const;

  /// Integer node coordinates of a flat index (last axis fastest).
  void node(std::size_t flat, std::span<int> out) const;
  std::size_t flat(std::span<const int> node) const;
  bool contains(std::span<const int> node) const;
  /// Flat index of -node.
  std::size_t mirror(std::size_t flat) const { return size() - 1 - flat; }
  /// |node|^2 in index units.
  long norm2(std::size_t flat) const;
  std::size_t origin() const { return size() / 2; }

  bool operator==(const Lattice&) const = default;
};

/// Lattice sized to reach |xi| = extent with at least the given spacing.
Lattice make_lattice(int dim, double extent, double spacing);

/// Complex samples on a Lattice.
struct SpectralField {
  Lattice lattice;
  std::vector<Complex> values;

  /// sum |v|^2 * cell volume (lattice Plancherel).
  double l2_norm() const;
  /// max |v(-xi) - conj(v(xi))|.
  double hermitian_defect() const;
};

/// mu^(xi) = sum_x w_x exp(-2 pi i x.xi) at every lattice node (direct sum).
SpectralField measure_fourier(const measures::DiscreteMeasure& m, const Lattice& lattice);

/// Transform of the full level-`depth` cylinder measure of an equal-ratio
/// IFS, prod_k sum_i p_i exp(-2 pi i r^k b_i.xi), started at the fixed point
/// of map 0. Identical to measure_fourier(enumerate_self_similar(ifs, depth))
/// without materialising m^depth atoms.
SpectralField self_similar_fourier(const measures::IfsSystem& ifs, int depth,
                                   const Lattice& lattice);

/// FFT of a gridded density with odd grid size N, giving F(k/(N h)) =
/// sum_x f(x) exp(-2 pi i x.xi) h^d on the lattice with half = (N-1)/2.
SpectralField grid_fourier(const measures::GridDensity& g);

/// Fourier transform of the surface measure of S^{n-1} in R^n at |xi| = rho,
/// 2 pi rho^{-(n-2)/2} J_{(n-2)/2}(2 pi rho); equals |S^{n-1}| at rho = 0.
double sphere_surface_ft(int n, double rho);

/// Surface measure of the radius-r sphere in R^n at xi:
/// r^{n-1} sphere_surface_ft(n, r |xi|).
double scaled_sphere_ft(int n, double r, std::span<const double> xi);

/// Surface area of S^{n-1}.
double sphere_area(int n);

/// C^2 ramp: 1 on [0,1], 0 on [2, inf).
double lp_ramp(double t);
/// Band cutoff eta_j(xi) at |xi| = rho: lp_ramp(rho) for j = 0, else
/// lp_ramp(2^{-j} rho) - lp_ramp(2^{1-j} rho).
double lp_cutoff(int j, double rho);

struct DyadicBand {
  int index = 0;
  SpectralField field;  ///< mu^ * eta_j
  double l2_norm = 0.0; ///< |mu_j|_2 by lattice Plancherel
};

/// Bands j = 0..jmax. Requires lattice extent >= 2^{jmax+1}.
std::vector<DyadicBand> littlewood_paley(const SpectralField& field, int jmax);

/// sum_{x != y} w_x w_y |x - y|^{-s}. Requires 0 < s < d.
double energy_spatial(const measures::DiscreteMeasure& m, double s);

/// pi^{s - d/2} Gamma((d-s)/2) / Gamma(s/2): I_s = gamma * int |xi|^{s-d} |mu^|^2.
double riesz_constant(int d, double s);

struct FrequencyEnergy {
  double raw = 0.0;        ///< Riemann sum of |xi|^{s-d} |mu^|^2, xi = 0 cell excluded
  double corrected = 0.0;  ///< singularity-subtracted sum (see energy_frequency)
  double gamma = 1.0;      ///< riesz_constant(d, s)

  /// gamma * corrected, comparable with energy_spatial.
  double normalized() const { return gamma * corrected; }
};

/// Frequency-side s-energy. `corrected` subtracts |mu^(0)|^2 exp(-pi |xi|^2)
/// before summing and adds its exact integral back, which removes the
/// lattice error of the |xi|^{s-d} singularity at the origin.
FrequencyEnergy energy_frequency(const SpectralField& field, double s);

/// CSV `xi_1,...,xi_d,re,im`.
void write_spectral_csv(std::ostream& out, const SpectralField& field);

}  // namespace falconer::spectral
