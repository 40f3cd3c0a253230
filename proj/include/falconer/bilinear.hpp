#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "falconer/measures.hpp"
#include "falconer/random.hpp"
#include "falconer/spectral.hpp"

namespace falconer::bilinear {

using spectral::Complex;
using spectral::Lattice;
using spectral::SpectralField;

/// Two band-limited fields on one lattice; fhat lives on the annulus
/// 2^{i-1} < |xi| <= 2^{i+1}, ghat on the j annulus, zero elsewhere.
struct BandPair {
  int i = 0;
  int j = 0;
  SpectralField fhat;
  SpectralField ghat;
  double f_norm = 0.0;
  double g_norm = 0.0;
};

/// True when the node lies in the dyadic annulus 2^{i-1} < |xi| <= 2^{i+1}.
bool in_annulus(const Lattice& lattice, std::size_t flat, int i);

/// Complex Gaussian coefficients on the two annuli. Throws ConfigurationError
/// when an annulus reaches past the lattice extent.
BandPair random_band_pair(const Lattice& lattice, int i, int j, Rng& rng);

/// Lattice with the same spacing and twice the half-width: holds every
/// eta + zeta with eta, zeta on `input`.
Lattice sum_lattice(const Lattice& input);

/// A_r(f,g)^(xi) = sum_eta fhat(eta) ghat(xi - eta) sigma^(r (eta, xi - eta)) d eta^d,
/// sigma the unit sphere in R^{2d}. Nodes of `output` must share the input
/// spacing; contributions landing outside `output` are dropped.
SpectralField bilinear_average_ft(const SpectralField& fhat, const SpectralField& ghat, double r,
                                  const Lattice& output);

/// Band-pair bound (4^i + 4^j)^{-(2d-1)/4} 2^{min(i,j) d/2} without its constant.
double band_pair_bound(int d, int i, int j);

/// max over trials of |A_r(f,g)|_2 / (|f|_2 |g|_2) for random band pairs.
double band_pair_ratio(int d, int i, int j, double r, const Lattice& lattice, int trials,
                    std::uint64_t seed);

/// Same ratio for one explicit pair. Rejects zero-norm input.
double bilinear_ratio(const BandPair& pair, double r);

struct DecayCell {
  int i = 0;
  int j = 0;
  double ratio = 0.0;
  double bound = 0.0;
  double constant() const { return ratio / bound; }
};

/// Lattice used by decay experiments: `grid` nodes per axis (half = grid/2)
/// with spacing chosen so the top band 2^{imax+1} reaches the edge.
Lattice decay_lattice(int d, int grid, int imax);

/// Every (i, j) in [imin, imax]^2, row-major in i.
std::vector<DecayCell> decay_table(int d, int imin, int imax, double r, int grid, int trials,
                                   std::uint64_t seed);

struct DistanceDensity {
  enum class Method { pushforward, fourier };
  Method method = Method::pushforward;
  std::vector<double> radii;
  std::vector<double> values;
  /// Pushforward: kept tuples over drawn tuples. Fourier: 1.
  double kept_fraction = 1.0;
  /// Fourier: max |Im| over max |Re|. Pushforward: 0.
  double imag_residue = 0.0;
};

/// Bin edges lo, lo + width, ..., lo + count * width.
std::vector<double> uniform_edges(double lo, double width, int count);

/// Configuration distances |(x,...,x) - (y_1,...,y_{k-1})| of `samples`
/// k-tuples drawn from m; tuples with coincident y's are dropped. The
/// second member is the number of dropped tuples.
std::pair<std::vector<double>, std::size_t> sample_configuration_distances(
    const measures::DiscreteMeasure& m, int k, std::size_t samples, std::uint64_t seed);

/// Histogram of configuration distances, normalised by bin width and by the
/// number of drawn tuples, times mass^k.
DistanceDensity distance_density_pushforward(const measures::DiscreteMeasure& m, int k,
                                             const std::vector<double>& edges, std::uint64_t seed,
                                             std::size_t samples);

/// k = 3 density r^{2d-1} sum_xi A_r(mu,mu)^(xi) conj(mu^(xi)) dxi^d with the
/// inner sum restricted to the input lattice. Throws NumericalIntegrityError
/// when the imaginary residue exceeds 1e-3.
DistanceDensity distance_density_fourier(const SpectralField& field,
                                         const std::vector<double>& radii);

struct Coverage {
  double lo = 0.0;        ///< longest covered interval [lo, hi]
  double hi = 0.0;
  double fraction = 0.0;  ///< covered share of [min, max]
  double length() const { return hi - lo; }
};

/// Longest run of sorted values with consecutive gaps <= epsilon, and the
/// measure of the union of [v - eps/2, v + eps/2] clipped to [min, max]
/// over max - min (1 for a single value).
Coverage interval_coverage(std::vector<double> values, double epsilon);

/// Share of [lo, hi] covered by the same union.
double window_coverage(std::vector<double> values, double epsilon, double lo, double hi);

}  // namespace falconer::bilinear
