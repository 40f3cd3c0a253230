#include "falconer/bilinear.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "falconer/errors.hpp"
#include "falconer/parallel.hpp"

namespace falconer::bilinear {

namespace {

/// sigma^ of the unit sphere in R^{2d} at r * spacing * sqrt(q), q = 0..qmax.
std::vector<double> kernel_table(int d, double r, double spacing, long qmax) {
  std::vector<double> table(static_cast<std::size_t>(qmax) + 1);
  for (long q = 0; q <= qmax; ++q)
    table[q] = spectral::sphere_surface_ft(2 * d, r * spacing * std::sqrt(static_cast<double>(q)));
  return table;
}

struct Support {
  std::vector<int> nodes;     // dim ints per entry
  std::vector<long> q;        // |node|^2
  std::vector<Complex> value;
  int max_abs = 0;
};

Support nonzero_support(const SpectralField& field) {
  const auto& lat = field.lattice;
  Support s;
  std::vector<int> node(lat.dim);
  for (std::size_t f = 0; f < lat.size(); ++f) {
    if (field.values[f] == Complex{}) continue;
    lat.node(f, node);
    for (int c : node) s.max_abs = std::max(s.max_abs, std::abs(c));
    s.nodes.insert(s.nodes.end(), node.begin(), node.end());
    s.q.push_back(lat.norm2(f));
    s.value.push_back(field.values[f]);
  }
  return s;
}

/// Flat offset of a node relative to the lattice origin.
long linear_offset(const Lattice& lat, const int* node) {
  long acc = 0;
  for (int a = 0; a < lat.dim; ++a) acc = acc * lat.width() + node[a];
  return acc;
}

}  // namespace

bool in_annulus(const Lattice& lattice, std::size_t flat, int i) {
  double rho2 = static_cast<double>(lattice.norm2(flat)) * lattice.spacing * lattice.spacing;
  return rho2 > std::ldexp(1.0, 2 * (i - 1)) && rho2 <= std::ldexp(1.0, 2 * (i + 1));
}

BandPair random_band_pair(const Lattice& lattice, int i, int j, Rng& rng) {
  if (i < 0 || j < 0) throw ConfigurationError("band indices must be nonnegative");
  double top = std::ldexp(1.0, std::max(i, j) + 1);
  if (top > lattice.extent() * (1.0 + 1e-12))
    throw ConfigurationError("band 2^" + std::to_string(std::max(i, j) + 1) +
                             " exceeds lattice extent " + std::to_string(lattice.extent()));
  BandPair pair{i, j, SpectralField{lattice, std::vector<Complex>(lattice.size())},
                SpectralField{lattice, std::vector<Complex>(lattice.size())}, 0.0, 0.0};
  for (std::size_t f = 0; f < lattice.size(); ++f) {
    if (in_annulus(lattice, f, i)) {
      double re = standard_normal(rng);
      pair.fhat.values[f] = {re, standard_normal(rng)};
    }
  }
  for (std::size_t f = 0; f < lattice.size(); ++f) {
    if (in_annulus(lattice, f, j)) {
      double re = standard_normal(rng);
      pair.ghat.values[f] = {re, standard_normal(rng)};
    }
  }
  pair.f_norm = pair.fhat.l2_norm();
  pair.g_norm = pair.ghat.l2_norm();
  return pair;
}

Lattice sum_lattice(const Lattice& input) { return Lattice{input.dim, 2 * input.half, input.spacing}; }

SpectralField bilinear_average_ft(const SpectralField& fhat, const SpectralField& ghat, double r,
                                  const Lattice& output) {
  if (!(fhat.lattice == ghat.lattice))
    throw ConfigurationError("bilinear_average_ft: fhat and ghat lattices differ");
  if (output.dim != fhat.lattice.dim || output.spacing != fhat.lattice.spacing)
    throw ConfigurationError("bilinear_average_ft: output lattice must share dimension and spacing");
  if (!(r > 0.0)) throw DomainError("bilinear_average_ft: r must be positive");
  const int d = output.dim;
  Support fs = nonzero_support(fhat);
  Support gs = nonzero_support(ghat);
  SpectralField out{output, std::vector<Complex>(output.size())};
  if (fs.q.empty() || gs.q.empty()) return out;

  long qmax = *std::max_element(fs.q.begin(), fs.q.end()) + *std::max_element(gs.q.begin(), gs.q.end());
  auto kernel = kernel_table(d, r, output.spacing, qmax);
  const bool check = fs.max_abs + gs.max_abs > output.half;
  const long origin = static_cast<long>(output.origin());
  std::vector<long> glin(gs.q.size());
  for (std::size_t b = 0; b < gs.q.size(); ++b) glin[b] = linear_offset(output, &gs.nodes[b * d]);

  for (std::size_t a = 0; a < fs.q.size(); ++a) {
    const int* na = &fs.nodes[a * d];
    const long base = origin + linear_offset(output, na);
    const Complex fa = fs.value[a];
    const long qa = fs.q[a];
    for (std::size_t b = 0; b < gs.q.size(); ++b) {
      if (check) {
        const int* nb = &gs.nodes[b * d];
        bool inside = true;
        for (int c = 0; c < d && inside; ++c) inside = std::abs(na[c] + nb[c]) <= output.half;
        if (!inside) continue;
      }
      out.values[base + glin[b]] += fa * gs.value[b] * kernel[qa + gs.q[b]];
    }
  }
  const double vol = output.cell_volume();
  for (auto& v : out.values) v *= vol;
  return out;
}

double band_pair_bound(int d, int i, int j) {
  double mag = std::ldexp(1.0, 2 * i) + std::ldexp(1.0, 2 * j);
  return std::pow(mag, -(2.0 * d - 1.0) / 4.0) * std::pow(2.0, std::min(i, j) * d / 2.0);
}

double bilinear_ratio(const BandPair& pair, double r) {
  if (!(pair.f_norm > 0.0) || !(pair.g_norm > 0.0))
    throw DegenerateInputError("bilinear ratio undefined for zero-norm input");
  const auto& lat = pair.fhat.lattice;
  // The product support sits inside |xi| <= 2^{i+1} + 2^{j+1} <= 2^{max(i,j)+2}.
  int reach = static_cast<int>(std::ceil(std::ldexp(1.0, std::max(pair.i, pair.j) + 2) / lat.spacing));
  Lattice output{lat.dim, std::min(reach, 2 * lat.half), lat.spacing};
  auto a = bilinear_average_ft(pair.fhat, pair.ghat, r, output);
  return a.l2_norm() / (pair.f_norm * pair.g_norm);
}

double band_pair_ratio(int d, int i, int j, double r, const Lattice& lattice, int trials,
                    std::uint64_t seed) {
  if (lattice.dim != d) throw ConfigurationError("band_pair_ratio: lattice dimension differs from d");
  if (trials < 1) throw ConfigurationError("band_pair_ratio: trials must be positive");
  std::vector<double> ratios(static_cast<std::size_t>(trials));
  parallel_for(ratios.size(), [&](std::size_t t) {
    std::uint64_t stream = (static_cast<std::uint64_t>(i) << 40) |
                           (static_cast<std::uint64_t>(j) << 20) | t;
    Rng rng = make_stream(seed, stream);
    ratios[t] = bilinear_ratio(random_band_pair(lattice, i, j, rng), r);
  });
  return *std::max_element(ratios.begin(), ratios.end());
}

Lattice decay_lattice(int d, int grid, int imax) {
  if (grid < 2) throw ConfigurationError("decay grid must be at least 2");
  int half = grid / 2;
  return Lattice{d, half, std::ldexp(1.0, imax + 1) / half};
}

std::vector<DecayCell> decay_table(int d, int imin, int imax, double r, int grid, int trials,
                                   std::uint64_t seed) {
  if (imin < 0 || imax < imin) throw ConfigurationError("decay_table: need 0 <= imin <= imax");
  Lattice lat = decay_lattice(d, grid, imax);
  std::vector<DecayCell> cells;
  for (int i = imin; i <= imax; ++i)
    for (int j = imin; j <= imax; ++j)
      cells.push_back({i, j, band_pair_ratio(d, i, j, r, lat, trials, seed), band_pair_bound(d, i, j)});
  return cells;
}

std::vector<double> uniform_edges(double lo, double width, int count) {
  if (!(width > 0.0) || count < 1) throw ConfigurationError("bins need positive width and count");
  std::vector<double> edges(static_cast<std::size_t>(count) + 1);
  for (int b = 0; b <= count; ++b) edges[b] = lo + b * width;
  return edges;
}

std::pair<std::vector<double>, std::size_t> sample_configuration_distances(
    const measures::DiscreteMeasure& m, int k, std::size_t samples, std::uint64_t seed) {
  if (k < 3) throw DomainError("configuration distances need k >= 3");
  if (samples < 1) throw DomainError("configuration distances need at least one sample");
  const int d = m.dim();
  WeightedPicker pick(m.weights());
  constexpr std::size_t kChunk = 1u << 16;
  const std::size_t chunks = (samples + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> kept(chunks);
  std::vector<std::size_t> dropped(chunks, 0);
  parallel_for(chunks, [&](std::size_t c) {
    Rng rng = make_stream(seed, c);
    std::size_t count = std::min(kChunk, samples - c * kChunk);
    std::vector<std::size_t> idx(static_cast<std::size_t>(k));
    kept[c].reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
      for (auto& v : idx) v = pick(rng);
      bool coincident = false;
      for (int a = 1; a < k && !coincident; ++a)
        for (int b = a + 1; b < k && !coincident; ++b)
          coincident = std::equal(m.point(idx[a]).begin(), m.point(idx[a]).end(),
                                  m.point(idx[b]).begin());
      if (coincident) {
        ++dropped[c];
        continue;
      }
      auto x = m.point(idx[0]);
      double acc = 0.0;
      for (int a = 1; a < k; ++a) {
        auto y = m.point(idx[a]);
        for (int c2 = 0; c2 < d; ++c2) acc += (x[c2] - y[c2]) * (x[c2] - y[c2]);
      }
      kept[c].push_back(std::sqrt(acc));
    }
  });
  std::vector<double> all;
  std::size_t lost = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    all.insert(all.end(), kept[c].begin(), kept[c].end());
    lost += dropped[c];
  }
  return {std::move(all), lost};
}

DistanceDensity distance_density_pushforward(const measures::DiscreteMeasure& m, int k,
                                             const std::vector<double>& edges, std::uint64_t seed,
                                             std::size_t samples) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
    throw ConfigurationError("pushforward bins must be increasing with at least one bin");
  auto [dist, dropped] = sample_configuration_distances(m, k, samples, seed);
  if (dist.empty()) throw DegenerateInputError("every sampled tuple had coincident points");
  const std::size_t bins = edges.size() - 1;
  std::vector<double> counts(bins, 0.0);
  for (double r : dist) {
    auto it = std::upper_bound(edges.begin(), edges.end(), r);
    if (it == edges.begin() || it == edges.end()) {
      if (r == edges.back()) counts.back() += 1.0;
      continue;
    }
    counts[static_cast<std::size_t>(it - edges.begin()) - 1] += 1.0;
  }
  DistanceDensity out;
  out.method = DistanceDensity::Method::pushforward;
  const double scale = std::pow(m.total_mass(), k) / static_cast<double>(samples);
  for (std::size_t b = 0; b < bins; ++b) {
    out.radii.push_back(0.5 * (edges[b] + edges[b + 1]));
    out.values.push_back(counts[b] * scale / (edges[b + 1] - edges[b]));
  }
  out.kept_fraction = static_cast<double>(dist.size()) / static_cast<double>(samples);
  return out;
}

DistanceDensity distance_density_fourier(const SpectralField& field,
                                         const std::vector<double>& radii) {
  const auto& lat = field.lattice;
  const int d = lat.dim;
  double scale = 0.0;
  for (const auto& v : field.values) scale = std::max(scale, std::abs(v));
  if (field.hermitian_defect() > 1e-9 * std::max(scale, 1.0))
    throw DomainError("distance_density_fourier: field is not Hermitian symmetric");
  for (double r : radii)
    if (!(r > 0.0)) throw DomainError("distance_density_fourier: radii must be positive");

  // sum_{eta, zeta} mu^(eta) mu^(zeta) conj(mu^(eta + zeta)) grouped by
  // q = |eta|^2 + |zeta|^2, so every radius reuses one pass over pairs.
  Support sup = nonzero_support(field);
  const long qmax = 2L * d * lat.half * lat.half;
  std::vector<Complex> s(static_cast<std::size_t>(qmax) + 1);
  const long origin = static_cast<long>(lat.origin());
  std::vector<long> lin(sup.q.size());
  for (std::size_t b = 0; b < sup.q.size(); ++b) lin[b] = linear_offset(lat, &sup.nodes[b * d]);
  for (std::size_t a = 0; a < sup.q.size(); ++a) {
    const int* na = &sup.nodes[a * d];
    for (std::size_t b = 0; b < sup.q.size(); ++b) {
      const int* nb = &sup.nodes[b * d];
      bool inside = true;
      for (int c = 0; c < d && inside; ++c) inside = std::abs(na[c] + nb[c]) <= lat.half;
      if (!inside) continue;
      Complex outer = field.values[origin + lin[a] + lin[b]];
      s[sup.q[a] + sup.q[b]] += sup.value[a] * sup.value[b] * std::conj(outer);
    }
  }

  DistanceDensity out;
  out.method = DistanceDensity::Method::fourier;
  out.radii = radii;
  const double vol2 = lat.cell_volume() * lat.cell_volume();
  double max_re = 0.0, max_im = 0.0;
  for (double r : radii) {
    auto kernel = kernel_table(d, r, lat.spacing, qmax);
    Complex acc = 0.0;
    for (long q = 0; q <= qmax; ++q)
      if (s[q] != Complex{}) acc += kernel[q] * s[q];
    acc *= std::pow(r, 2 * d - 1) * vol2;
    out.values.push_back(acc.real());
    max_re = std::max(max_re, std::abs(acc.real()));
    max_im = std::max(max_im, std::abs(acc.imag()));
  }
  out.imag_residue = max_re > 0.0 ? max_im / max_re : (max_im > 0.0 ? 1.0 : 0.0);
  if (out.imag_residue > 1e-3)
    throw NumericalIntegrityError("distance_density_fourier: imaginary residue " +
                                  std::to_string(out.imag_residue) + " exceeds 1e-3");
  return out;
}

Coverage interval_coverage(std::vector<double> values, double epsilon) {
  if (values.empty()) throw DomainError("interval_coverage: empty input");
  if (!(epsilon > 0.0)) throw DomainError("interval_coverage: epsilon must be positive");
  std::sort(values.begin(), values.end());
  Coverage cov{values.front(), values.front(), 1.0};
  std::size_t start = 0;
  for (std::size_t i = 1; i <= values.size(); ++i) {
    if (i == values.size() || values[i] - values[i - 1] > epsilon) {
      if (values[i - 1] - values[start] > cov.length()) {
        cov.lo = values[start];
        cov.hi = values[i - 1];
      }
      start = i;
    }
  }
  double span = values.back() - values.front();
  if (span > 0.0) cov.fraction = window_coverage(values, epsilon, values.front(), values.back());
  return cov;
}

double window_coverage(std::vector<double> values, double epsilon, double lo, double hi) {
  if (!(epsilon > 0.0)) throw DomainError("window_coverage: epsilon must be positive");
  if (!(hi > lo)) throw DomainError("window_coverage: empty window");
  std::sort(values.begin(), values.end());
  double covered = 0.0;
  double reach = lo;  // right end of the union so far, clipped to the window
  for (double v : values) {
    double a = std::max(v - 0.5 * epsilon, reach);
    double b = std::min(v + 0.5 * epsilon, hi);
    if (b > a) {
      covered += b - a;
      reach = b;
    }
  }
  return covered / (hi - lo);
}

}  // namespace falconer::bilinear
