#include "falconer/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "falconer/config.hpp"
#include "falconer/errors.hpp"
#include "falconer/random.hpp"

namespace falconer::measures {

namespace {

Box tight_box(int dim, const std::vector<double>& coords) {
  Box box{std::vector<double>(dim, std::numeric_limits<double>::infinity()),
          std::vector<double>(dim, -std::numeric_limits<double>::infinity())};
  for (std::size_t i = 0; i < coords.size(); ++i) {
    auto a = i % static_cast<std::size_t>(dim);
    box.lo[a] = std::min(box.lo[a], coords[i]);
    box.hi[a] = std::max(box.hi[a], coords[i]);
  }
  return box;
}

// Visits every multi-index in [lo, hi] (inclusive, per axis), last axis fastest.
template <class F>
void for_each_index(const std::vector<long>& lo, const std::vector<long>& hi, F&& f) {
  std::vector<long> idx = lo;
  const std::size_t d = lo.size();
  while (true) {
    f(idx);
    std::size_t a = d;
    while (a > 0) {
      --a;
      if (++idx[a] <= hi[a]) break;
      idx[a] = lo[a];
      if (a == 0) return;
    }
    if (d == 0) return;
  }
}

double unit_sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

}  // namespace

bool Box::contains(std::span<const double> x) const {
  for (std::size_t a = 0; a < x.size(); ++a)
    if (!(x[a] >= lo[a] && x[a] <= hi[a])) return false;
  return true;
}

IfsSystem::IfsSystem(int dim, std::vector<SimilarityMap> maps, std::vector<double> weights)
    : dim_(dim), maps_(std::move(maps)), weights_(std::move(weights)) {
  if (dim_ < 1) throw ConfigurationError("IFS dimension must be positive");
  if (maps_.empty()) throw ConfigurationError("IFS needs at least one map");
  if (weights_.size() != maps_.size())
    throw ConfigurationError("IFS weight count does not match map count");
  double total = 0.0;
  for (std::size_t i = 0; i < maps_.size(); ++i) {
    const auto& m = maps_[i];
    if (!(m.ratio > 0.0 && m.ratio < 1.0))
      throw ConfigurationError("IFS ratio " + std::to_string(m.ratio) + " not in (0,1)");
    if (static_cast<int>(m.offset.size()) != dim_)
      throw ConfigurationError("IFS offset has wrong dimension");
    if (!(weights_[i] >= 0.0)) throw ConfigurationError("IFS weights must be nonnegative");
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigurationError("IFS weights must sum to 1");

  // Extreme coordinates of the attractor are attained at map fixed points.
  box_.lo.assign(dim_, std::numeric_limits<double>::infinity());
  box_.hi.assign(dim_, -std::numeric_limits<double>::infinity());
  for (const auto& m : maps_) {
    for (int a = 0; a < dim_; ++a) {
      double fixed = m.offset[a] / (1.0 - m.ratio);
      box_.lo[a] = std::min(box_.lo[a], fixed);
      box_.hi[a] = std::max(box_.hi[a], fixed);
    }
  }
  for (int a = 0; a < dim_; ++a) {
    double slack = 1e-12 * (1.0 + box_.hi[a] - box_.lo[a]);
    box_.lo[a] -= slack;
    box_.hi[a] += slack;
  }
}

double IfsSystem::ball_bound() const {
  double bmax = 0.0, rmax = 0.0;
  for (const auto& m : maps_) {
    double n2 = 0.0;
    for (double b : m.offset) n2 += b * b;
    bmax = std::max(bmax, std::sqrt(n2));
    rmax = std::max(rmax, m.ratio);
  }
  return bmax / (1.0 - rmax);
}

bool IfsSystem::equal_ratios() const {
  return std::all_of(maps_.begin(), maps_.end(),
                     [&](const SimilarityMap& m) { return m.ratio == maps_.front().ratio; });
}

void IfsSystem::apply(std::size_t map, std::span<double> x) const {
  const auto& m = maps_[map];
  for (int a = 0; a < dim_; ++a) x[a] = std::fma(m.ratio, x[a], m.offset[a]);
}

DiscreteMeasure::DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights)
    : DiscreteMeasure(dim, coords, weights, tight_box(dim, coords)) {}

DiscreteMeasure::DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights,
                                 Box box)
    : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)), box_(std::move(box)) {
  if (dim_ < 1) throw ConfigurationError("measure dimension must be positive");
  if (coords_.size() != weights_.size() * static_cast<std::size_t>(dim_))
    throw ConfigurationError("coordinate count does not match weights");
  total_mass_ = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw ConfigurationError("measure weights must be nonnegative");
    total_mass_ += w;
  }
  if (!weights_.empty()) {
    if (box_.lo.size() != static_cast<std::size_t>(dim_) ||
        box_.hi.size() != static_cast<std::size_t>(dim_))
      throw ConfigurationError("bounding box has wrong dimension");
    for (std::size_t i = 0; i < size(); ++i)
      if (!box_.contains(point(i))) throw DomainError("measure point outside declared box");
  }
}

DiscreteMeasure DiscreteMeasure::dilated(double scale) const {
  std::vector<double> c(coords_);
  for (double& v : c) v *= scale;
  Box b = box_;
  for (int a = 0; a < dim_; ++a) {
    double l = b.lo[a] * scale, h = b.hi[a] * scale;
    b.lo[a] = std::min(l, h);
    b.hi[a] = std::max(l, h);
  }
  return DiscreteMeasure(dim_, std::move(c), weights_, std::move(b));
}

double GridDensity::mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * std::pow(cell, dim);
}

std::vector<double> GridDensity::centre(std::size_t flat) const {
  std::vector<double> x(dim);
  for (int a = dim - 1; a >= 0; --a) {
    auto i = flat % static_cast<std::size_t>(size);
    flat /= static_cast<std::size_t>(size);
    x[a] = origin[a] + (static_cast<double>(i) + 0.5) * cell;
  }
  return x;
}

IfsSystem build_cantor_dust(int dim, double ratio, int branches) {
  if (dim < 1) throw ConfigurationError("Cantor dust dimension must be positive");
  if (!(ratio > 0.0 && ratio <= 0.5)) throw DomainError("Cantor dust ratio must lie in (0, 1/2]");
  if (branches < 1 || (dim < 31 && branches > (1 << dim)))
    throw ConfigurationError("Cantor dust: " + std::to_string(branches) +
                             " branches do not fit the corners of the unit cube in dimension " +
                             std::to_string(dim));
  std::vector<SimilarityMap> maps;
  for (int i = 0; i < branches; ++i) {
    SimilarityMap m{ratio, std::vector<double>(dim)};
    for (int a = 0; a < dim; ++a) m.offset[a] = ((i >> a) & 1) ? 1.0 - ratio : 0.0;
    maps.push_back(std::move(m));
  }
  return IfsSystem(dim, std::move(maps), std::vector<double>(branches, 1.0 / branches));
}

double similarity_dimension(const IfsSystem& ifs) {
  const auto& maps = ifs.maps();
  const double m = static_cast<double>(maps.size());
  if (maps.size() == 1) return 0.0;
  if (ifs.equal_ratios()) return std::log(m) / std::log(1.0 / maps.front().ratio);

  auto moran = [&](double s) {
    double acc = 0.0;
    for (const auto& f : maps) acc += std::pow(f.ratio, s);
    return acc - 1.0;
  };
  double rmax = 0.0;
  for (const auto& f : maps) rmax = std::max(rmax, f.ratio);
  double lo = 0.0, hi = std::log(m) / std::log(1.0 / rmax);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    double mid = 0.5 * (lo + hi);
    (moran(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

DiscreteMeasure sample_self_similar(const IfsSystem& ifs, std::size_t n, int depth,
                                    std::uint64_t seed) {
  if (n < 1) throw DomainError("sample_self_similar: n must be at least 1");
  if (depth < 1) throw DomainError("sample_self_similar: depth must be at least 1");
  const int d = ifs.dim();
  const auto& f0 = ifs.maps().front();
  std::vector<double> start(d);
  for (int a = 0; a < d; ++a) start[a] = f0.offset[a] / (1.0 - f0.ratio);

  Rng rng(seed);
  WeightedPicker pick(ifs.weights());
  std::vector<double> coords(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> x(coords.data() + i * d, d);
    std::copy(start.begin(), start.end(), x.begin());
    for (int k = 0; k < depth; ++k) ifs.apply(pick(rng), x);
  }
  return DiscreteMeasure(d, std::move(coords), std::vector<double>(n, 1.0 / static_cast<double>(n)),
                         ifs.bounding_box());
}

DiscreteMeasure enumerate_self_similar(const IfsSystem& ifs, int depth) {
  if (depth < 0) throw DomainError("enumerate_self_similar: depth must be nonnegative");
  const int d = ifs.dim();
  const double count = std::pow(static_cast<double>(ifs.size()), depth);
  if (count > 5e7) throw ConfigurationError("enumerate_self_similar: tree too large");
  const auto& f0 = ifs.maps().front();
  std::vector<double> coords(d);
  for (int a = 0; a < d; ++a) coords[a] = f0.offset[a] / (1.0 - f0.ratio);
  std::vector<double> weights{1.0};
  for (int level = 0; level < depth; ++level) {
    std::vector<double> next_c;
    std::vector<double> next_w;
    next_c.reserve(coords.size() * ifs.size());
    next_w.reserve(weights.size() * ifs.size());
    for (std::size_t p = 0; p < weights.size(); ++p) {
      for (std::size_t i = 0; i < ifs.size(); ++i) {
        for (int a = 0; a < d; ++a) next_c.push_back(coords[p * d + a]);
        ifs.apply(i, std::span<double>(next_c.data() + next_c.size() - d, d));
        next_w.push_back(weights[p] * ifs.weights()[i]);
      }
    }
    coords = std::move(next_c);
    weights = std::move(next_w);
  }
  return DiscreteMeasure(d, std::move(coords), std::move(weights), ifs.bounding_box());
}

double bump(std::span<const double> x) {
  const int d = static_cast<int>(x.size());
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  if (r2 >= 1.0) return 0.0;
  // int_B (1-|x|^2)^2 dx = 8 |S^{d-1}| / (d (d+2) (d+4))
  const double norm = d * (d + 2.0) * (d + 4.0) / (8.0 * unit_sphere_area(d));
  double u = 1.0 - r2;
  return norm * u * u;
}

GridDensity mollify_to_grid(const DiscreteMeasure& m, int grid_size, double epsilon) {
  if (grid_size < 2) throw DomainError("mollify_to_grid: grid size must be at least 2");
  if (!(epsilon > 0.0)) throw DomainError("mollify_to_grid: epsilon must be positive");
  const int d = m.dim();
  double extent = 0.0;
  for (int a = 0; a < d; ++a) extent = std::max(extent, m.box().hi[a] - m.box().lo[a]);
  // N cells of width h with the box padded by epsilon + h/2 on each side.
  const double h = (extent + 2.0 * epsilon) / (grid_size - 1);
  std::vector<double> origin(d);
  for (int a = 0; a < d; ++a) {
    double mid = 0.5 * (m.box().lo[a] + m.box().hi[a]);
    origin[a] = mid - 0.5 * grid_size * h;
  }
  return mollify_to_grid(m, grid_size, epsilon, std::move(origin), h);
}

GridDensity mollify_to_grid(const DiscreteMeasure& m, int grid_size, double epsilon,
                            std::vector<double> origin, double cell) {
  const int d = m.dim();
  if (grid_size < 2) throw DomainError("mollify_to_grid: grid size must be at least 2");
  if (!(cell > 0.0)) throw DomainError("mollify_to_grid: cell width must be positive");
  if (!(epsilon >= 2.0 * cell))
    throw DomainError("mollify_to_grid: epsilon must be at least two cell widths");
  if (static_cast<int>(origin.size()) != d)
    throw ConfigurationError("mollify_to_grid: origin has wrong dimension");

  GridDensity g{d, grid_size, cell, std::move(origin), {}};
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(grid_size);
  g.values.assign(total, 0.0);

  const double cell_volume = std::pow(cell, d);
  std::vector<long> lo(d), hi(d);
  std::vector<double> z(d);
  std::vector<std::pair<std::size_t, double>> stencil;
  for (std::size_t p = 0; p < m.size(); ++p) {
    auto x = m.point(p);
    for (int a = 0; a < d; ++a) {
      lo[a] = static_cast<long>(std::floor((x[a] - epsilon - g.origin[a]) / cell - 0.5));
      hi[a] = static_cast<long>(std::ceil((x[a] + epsilon - g.origin[a]) / cell - 0.5));
    }
    stencil.clear();
    double sum = 0.0;
    for_each_index(lo, hi, [&](const std::vector<long>& idx) {
      for (int a = 0; a < d; ++a)
        z[a] = (g.origin[a] + (static_cast<double>(idx[a]) + 0.5) * cell - x[a]) / epsilon;
      double v = bump(z);
      if (v <= 0.0) return;
      std::size_t flat = 0;
      for (int a = 0; a < d; ++a) {
        if (idx[a] < 0 || idx[a] >= grid_size)
          throw DomainError("mollify_to_grid: mollified support leaves the grid");
        flat = flat * static_cast<std::size_t>(grid_size) + static_cast<std::size_t>(idx[a]);
      }
      stencil.emplace_back(flat, v);
      sum += v;
    });
    if (sum <= 0.0) throw DomainError("mollify_to_grid: bump not resolved by the grid");
    const double scale = m.weights()[p] / (sum * cell_volume);
    for (auto [flat, v] : stencil) g.values[flat] += scale * v;
  }
  return g;
}

void write_measure_csv(std::ostream& out, const DiscreteMeasure& m) {
  auto old_prec = out.precision(17);
  out << "# d=" << m.dim() << " mass=" << m.total_mass() << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (double c : m.point(i)) out << c << ',';
    out << m.weights()[i] << '\n';
  }
  out.precision(old_prec);
}

DiscreteMeasure read_measure_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# d=", 0) != 0)
    throw ConfigurationError("measure CSV: missing `# d=<d> mass=<m>` header");
  int d = 0;
  double mass = 0.0;
  if (std::sscanf(line.c_str(), "# d=%d mass=%lf", &d, &mass) != 2 || d < 1)
    throw ConfigurationError("measure CSV: malformed header `" + line + "`");
  std::vector<double> coords, weights;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    auto row = parse_double_list(line, "measure CSV row");
    if (static_cast<int>(row.size()) != d + 1)
      throw ConfigurationError("measure CSV: row has wrong number of columns");
    coords.insert(coords.end(), row.begin(), row.end() - 1);
    weights.push_back(row.back());
  }
  DiscreteMeasure m(d, std::move(coords), std::move(weights));
  if (std::abs(m.total_mass() - mass) > 1e-10 * std::max(1.0, std::abs(mass)))
    throw ConfigurationError("measure CSV: header mass does not match weights");
  return m;
}

std::string ifs_to_config(const IfsSystem& ifs) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "d = " << ifs.dim() << '\n';
  out << "ratios = ";
  for (std::size_t i = 0; i < ifs.size(); ++i) out << (i ? ", " : "") << ifs.maps()[i].ratio;
  out << "\noffsets = ";
  for (std::size_t i = 0; i < ifs.size(); ++i) {
    out << (i ? "; " : "");
    const auto& b = ifs.maps()[i].offset;
    for (std::size_t a = 0; a < b.size(); ++a) out << (a ? ", " : "") << b[a];
  }
  out << "\nweights = ";
  for (std::size_t i = 0; i < ifs.size(); ++i) out << (i ? ", " : "") << ifs.weights()[i];
  out << '\n';
  return out.str();
}

IfsSystem ifs_from_config(const std::string& text) {
  auto cfg = KeyValueConfig::parse(text);
  for (const auto& [key, value] : cfg.entries()) {
    static const std::vector<std::string> known{"d", "ratios", "offsets", "weights"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigurationError("IFS config: unknown key `" + key + "` (did you mean `" +
                               nearest_key(key, known) + "`?)");
  }
  const int d = static_cast<int>(cfg.require_int("d"));
  auto ratios = parse_double_list(cfg.require("ratios"), "ratios");
  auto weights = parse_double_list(cfg.require("weights"), "weights");
  std::vector<SimilarityMap> maps;
  std::istringstream offsets(cfg.require("offsets"));
  std::string item;
  std::size_t i = 0;
  while (std::getline(offsets, item, ';')) {
    if (i >= ratios.size()) throw ConfigurationError("IFS config: more offsets than ratios");
    maps.push_back({ratios[i++], parse_double_list(item, "offsets")});
  }
  if (maps.size() != ratios.size()) throw ConfigurationError("IFS config: offsets/ratios mismatch");
  return IfsSystem(d, std::move(maps), std::move(weights));
}

}  // namespace falconer::measures
