#include "falconer/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>

#include "falconer/bessel.hpp"
#include "falconer/errors.hpp"
#include "falconer/parallel.hpp"

namespace falconer::spectral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Complex cis(double phase) { return {std::cos(phase), std::sin(phase)}; }

}  // namespace

std::size_t Lattice::size() const {
  std::size_t n = 1;
  for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(width());
  return n;
}

double Lattice::cell_volume() const { return std::pow(spacing, dim); }

void Lattice::node(std::size_t flat, std::span<int> out) const {
  const auto w = static_cast<std::size_t>(width());
  for (int a = dim - 1; a >= 0; --a) {
    out[a] = static_cast<int>(flat % w) - half;
    flat /= w;
  }
}

std::size_t Lattice::flat(std::span<const int> node) const {
  std::size_t f = 0;
  for (int a = 0; a < dim; ++a)
    f = f * static_cast<std::size_t>(width()) + static_cast<std::size_t>(node[a] + half);
  return f;
}

bool Lattice::contains(std::span<const int> node) const {
  for (int a = 0; a < dim; ++a)
    if (node[a] < -half || node[a] > half) return false;
  return true;
}

long Lattice::norm2(std::size_t flat) const {
  const auto w = static_cast<std::size_t>(width());
  long acc = 0;
  for (int a = 0; a < dim; ++a) {
    long c = static_cast<long>(flat % w) - half;
    flat /= w;
    acc += c * c;
  }
  return acc;
}

Lattice make_lattice(int dim, double extent, double spacing) {
  if (dim < 1 || dim > kMaxLatticeDim)
    throw ConfigurationError("lattice dimension must lie in [1, 8]");
  if (!(extent > 0.0) || !(spacing > 0.0))
    throw ConfigurationError("lattice extent and spacing must be positive");
  int half = static_cast<int>(std::ceil(extent / spacing - 1e-9));
  return Lattice{dim, half, spacing};
}

double SpectralField::l2_norm() const {
  double acc = 0.0;
  for (const auto& v : values) acc += std::norm(v);
  return std::sqrt(acc * lattice.cell_volume());
}

double SpectralField::hermitian_defect() const {
  double worst = 0.0;
  for (std::size_t f = 0; f < values.size(); ++f)
    worst = std::max(worst, std::abs(values[lattice.mirror(f)] - std::conj(values[f])));
  return worst;
}

SpectralField measure_fourier(const measures::DiscreteMeasure& m, const Lattice& lattice) {
  if (m.dim() != lattice.dim) throw ConfigurationError("measure/lattice dimension mismatch");
  if (lattice.dim > kMaxLatticeDim) throw ConfigurationError("lattice dimension above 8");
  if (!(lattice.spacing > 0.0) || lattice.half < 0)
    throw ConfigurationError("lattice extent and spacing must be positive");
  SpectralField out{lattice, std::vector<Complex>(lattice.size())};
  const int d = lattice.dim;
  parallel_for(lattice.size(), [&](std::size_t f) {
    int node[kMaxLatticeDim];
    double xi[kMaxLatticeDim];
    lattice.node(f, std::span<int>(node, d));
    for (int a = 0; a < d; ++a) xi[a] = node[a] * lattice.spacing;
    double re = 0.0, im = 0.0;
    for (std::size_t p = 0; p < m.size(); ++p) {
      auto x = m.point(p);
      double dot = 0.0;
      for (int a = 0; a < d; ++a) dot += x[a] * xi[a];
      double phase = -kTwoPi * dot;
      re += m.weights()[p] * std::cos(phase);
      im += m.weights()[p] * std::sin(phase);
    }
    out.values[f] = {re, im};
  });
  return out;
}

SpectralField self_similar_fourier(const measures::IfsSystem& ifs, int depth,
                                   const Lattice& lattice) {
  if (ifs.dim() != lattice.dim) throw ConfigurationError("IFS/lattice dimension mismatch");
  if (lattice.dim > kMaxLatticeDim) throw ConfigurationError("lattice dimension above 8");
  if (!ifs.equal_ratios())
    throw ConfigurationError("self_similar_fourier: product formula needs equal ratios");
  if (depth < 0) throw DomainError("self_similar_fourier: depth must be nonnegative");
  const int d = lattice.dim;
  const double r = ifs.maps().front().ratio;
  const auto& f0 = ifs.maps().front();
  SpectralField out{lattice, std::vector<Complex>(lattice.size())};
  parallel_for(lattice.size(), [&](std::size_t f) {
    int node[kMaxLatticeDim];
    double xi[kMaxLatticeDim];
    lattice.node(f, std::span<int>(node, d));
    for (int a = 0; a < d; ++a) xi[a] = node[a] * lattice.spacing;
    Complex acc = 1.0;
    double scale = 1.0;
    for (int k = 0; k < depth; ++k, scale *= r) {
      Complex level = 0.0;
      for (std::size_t i = 0; i < ifs.size(); ++i) {
        double dot = 0.0;
        for (int a = 0; a < d; ++a) dot += ifs.maps()[i].offset[a] * xi[a];
        level += ifs.weights()[i] * cis(-kTwoPi * scale * dot);
      }
      acc *= level;
    }
    double dot = 0.0;
    for (int a = 0; a < d; ++a) dot += f0.offset[a] / (1.0 - f0.ratio) * xi[a];
    out.values[f] = acc * cis(-kTwoPi * scale * dot);
  });
  return out;
}

SpectralField grid_fourier(const measures::GridDensity& g) {
  if (g.size % 2 == 0) throw ConfigurationError("grid_fourier: grid size must be odd");
  const int d = g.dim;
  const int n = g.size;
  std::size_t total = g.values.size();

  struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
  };
  struct BufferDeleter {
    void operator()(fftw_complex* p) const { fftw_free(p); }
  };
  std::unique_ptr<fftw_complex, BufferDeleter> buf(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total)));
  std::vector<int> dims(d, n);
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan(
      fftw_plan_dft(d, dims.data(), buf.get(), buf.get(), FFTW_FORWARD, FFTW_ESTIMATE));
  for (std::size_t i = 0; i < total; ++i) {
    buf.get()[i][0] = g.values[i];
    buf.get()[i][1] = 0.0;
  }
  fftw_execute(plan.get());

  Lattice lattice{d, (n - 1) / 2, 1.0 / (n * g.cell)};
  SpectralField out{lattice, std::vector<Complex>(lattice.size())};
  const double vol = std::pow(g.cell, d);
  std::vector<int> node(d);
  for (std::size_t f = 0; f < lattice.size(); ++f) {
    lattice.node(f, node);
    std::size_t src = 0;
    double dot = 0.0;
    for (int a = 0; a < d; ++a) {
      src = src * n + static_cast<std::size_t>((node[a] + n) % n);
      dot += (g.origin[a] + 0.5 * g.cell) * node[a] * lattice.spacing;
    }
    Complex dft{buf.get()[src][0], buf.get()[src][1]};
    out.values[f] = vol * dft * cis(-kTwoPi * dot);
  }
  return out;
}

double sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

double sphere_surface_ft(int n, double rho) {
  if (n < 2) throw DomainError("sphere_surface_ft: ambient dimension must be at least 2");
  if (!(rho >= 0.0)) throw DomainError("sphere_surface_ft: rho must be nonnegative");
  const double nu = 0.5 * (n - 2);
  // 2 pi rho^{-nu} J_nu(2 pi rho) = 2 pi^{nu+1} (pi rho)^{-nu} J_nu(2 pi rho)
  return 2.0 * std::pow(std::numbers::pi, nu + 1.0) * bessel_j_scaled(nu, kTwoPi * rho);
}

double scaled_sphere_ft(int n, double r, std::span<const double> xi) {
  if (!(r > 0.0)) throw DomainError("scaled_sphere_ft: radius must be positive");
  double n2 = 0.0;
  for (double v : xi) n2 += v * v;
  return std::pow(r, n - 1) * sphere_surface_ft(n, r * std::sqrt(n2));
}

double lp_ramp(double t) {
  if (t <= 1.0) return 1.0;
  if (t >= 2.0) return 0.0;
  double u = t - 1.0;
  return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

double lp_cutoff(int j, double rho) {
  if (j == 0) return lp_ramp(rho);
  return lp_ramp(std::ldexp(rho, -j)) - lp_ramp(std::ldexp(rho, 1 - j));
}

std::vector<DyadicBand> littlewood_paley(const SpectralField& field, int jmax) {
  if (jmax < 0) throw ConfigurationError("littlewood_paley: jmax must be nonnegative");
  if (field.lattice.extent() < std::ldexp(1.0, jmax + 1))
    throw ConfigurationError("littlewood_paley: lattice extent " +
                             std::to_string(field.lattice.extent()) + " is below 2^(jmax+1)");
  const auto& lat = field.lattice;
  std::vector<DyadicBand> bands;
  for (int j = 0; j <= jmax; ++j) {
    DyadicBand band{j, SpectralField{lat, std::vector<Complex>(lat.size())}, 0.0};
    for (std::size_t f = 0; f < lat.size(); ++f) {
      double rho = std::sqrt(static_cast<double>(lat.norm2(f))) * lat.spacing;
      band.field.values[f] = field.values[f] * lp_cutoff(j, rho);
    }
    band.l2_norm = band.field.l2_norm();
    bands.push_back(std::move(band));
  }
  return bands;
}

double energy_spatial(const measures::DiscreteMeasure& m, double s) {
  const int d = m.dim();
  if (!(s > 0.0 && s < d)) throw DomainError("energy_spatial: s must lie in (0, d)");
  const std::size_t n = m.size();
  std::vector<double> rows(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    auto x = m.point(i);
    double acc = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      auto y = m.point(j);
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
      if (r2 == 0.0) continue;  // coincident atoms belong to the excluded diagonal
      acc += m.weights()[j] * std::exp(-0.5 * s * std::log(r2));
    }
    rows[i] = m.weights()[i] * acc;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return 2.0 * total;
}

double riesz_constant(int d, double s) {
  return std::pow(std::numbers::pi, s - 0.5 * d) * std::tgamma(0.5 * (d - s)) / std::tgamma(0.5 * s);
}

FrequencyEnergy energy_frequency(const SpectralField& field, double s) {
  const auto& lat = field.lattice;
  const int d = lat.dim;
  if (!(s > 0.0 && s < d)) throw DomainError("energy_frequency: s must lie in (0, d)");
  const double c0 = std::norm(field.values[lat.origin()]);
  double raw = 0.0, rest = 0.0;
  for (std::size_t f = 0; f < lat.size(); ++f) {
    long q = lat.norm2(f);
    if (q == 0) continue;
    double rho2 = static_cast<double>(q) * lat.spacing * lat.spacing;
    double weight = std::exp(0.5 * (s - d) * std::log(rho2));
    double v = std::norm(field.values[f]);
    raw += weight * v;
    rest += weight * (v - c0 * std::exp(-std::numbers::pi * rho2));
  }
  raw *= lat.cell_volume();
  rest *= lat.cell_volume();
  // int |xi|^{s-d} exp(-pi |xi|^2) dxi = |S^{d-1}| Gamma(s/2) pi^{-s/2} / 2
  double gaussian = 0.5 * sphere_area(d) * std::tgamma(0.5 * s) * std::pow(std::numbers::pi, -0.5 * s);
  return {raw, rest + c0 * gaussian, riesz_constant(d, s)};
}

void write_spectral_csv(std::ostream& out, const SpectralField& field) {
  auto old_prec = out.precision(17);
  const auto& lat = field.lattice;
  for (int a = 0; a < lat.dim; ++a) out << "xi_" << a + 1 << ',';
  out << "re,im\n";
  std::vector<int> node(lat.dim);
  for (std::size_t f = 0; f < lat.size(); ++f) {
    lat.node(f, node);
    for (int a = 0; a < lat.dim; ++a) out << node[a] * lat.spacing << ',';
    out << field.values[f].real() << ',' << field.values[f].imag() << '\n';
  }
  out.precision(old_prec);
}

}  // namespace falconer::spectral
