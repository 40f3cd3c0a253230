#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace falconer::measures {

/// Axis-aligned box [lo, hi] in R^d.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  bool contains(std::span<const double> x) const;
};

/// x -> ratio * x + offset.
struct SimilarityMap {
  double ratio = 0.5;
  std::vector<double> offset;
};

/// Finite family of contracting similarities on R^d with selection
/// probabilities. Immutable once constructed; the constructor validates.
class IfsSystem {
 public:
  IfsSystem(int dim, std::vector<SimilarityMap> maps, std::vector<double> weights);

  int dim() const { return dim_; }
  std::size_t size() const { return maps_.size(); }
  const std::vector<SimilarityMap>& maps() const { return maps_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Radius of a centred ball containing the attractor:
  /// max |b_i| / (1 - max r_i).
  double ball_bound() const;

  /// Smallest axis-aligned box mapped into itself by every map; contains
  /// the attractor.
  const Box& bounding_box() const { return box_; }

  /// True when every map shares one ratio (product Fourier formula applies).
  bool equal_ratios() const;

  void apply(std::size_t map, std::span<double> x) const;

 private:
  int dim_;
  std::vector<SimilarityMap> maps_;
  std::vector<double> weights_;
  Box box_;
};

/// Weighted point cloud in R^d. Coordinates are stored row-major.
class DiscreteMeasure {
 public:
  DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights);
  DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights, Box box);

  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  const std::vector<double>& coords() const { return coords_; }
  const std::vector<double>& weights() const { return weights_; }
  double total_mass() const { return total_mass_; }
  const Box& box() const { return box_; }

  /// Image under x -> scale * x.
  DiscreteMeasure dilated(double scale) const;

 private:
  int dim_;
  std::vector<double> coords_;
  std::vector<double> weights_;
  double total_mass_;
  Box box_;
};

/// Nonnegative density sampled at cell centres of an N^d lattice.
struct GridDensity {
  int dim = 1;
  int size = 0;
  double cell = 0.0;
  std::vector<double> origin;  ///< lower corner of the grid box
  std::vector<double> values;  ///< row-major, last axis fastest

  double mass() const;
  /// Centre of the cell with the given flat index.
  std::vector<double> centre(std::size_t flat) const;
};

/// Cantor dust: `branches` maps of the given ratio, map i placed at the
/// corner c_i * (1 - ratio) of the unit cube, uniform weights.
IfsSystem build_cantor_dust(int dim, double ratio, int branches);

/// Unique s >= 0 with sum r_i^s = 1.
double similarity_dimension(const IfsSystem& ifs);

/// Chaos-game sample: each point is the composition of `depth` maps drawn
/// by weight, applied to the fixed point of map 0. Weights are 1/n.
DiscreteMeasure sample_self_similar(const IfsSystem& ifs, std::size_t n, int depth,
                                    std::uint64_t seed);

/// All m^depth level-`depth` cylinder points with product weights.
DiscreteMeasure enumerate_self_similar(const IfsSystem& ifs, int depth);

/// Normalised C^2 bump c_d (1 - |x|^2)^2 on the unit ball.
double bump(std::span<const double> x);

/// psi_eps * m sampled on an N^d grid over the measure's box, padded by
/// epsilon on every side. The lattice sum is renormalised per atom so grid
/// mass equals measure mass.
GridDensity mollify_to_grid(const DiscreteMeasure& m, int grid_size, double epsilon);

/// Same on an explicit grid (lower corner, cell width). Throws DomainError
/// when an atom's bump leaves the grid.
GridDensity mollify_to_grid(const DiscreteMeasure& m, int grid_size, double epsilon,
                            std::vector<double> origin, double cell);

/// `# d=<d> mass=<m>` header, then `x1,...,xd,weight` rows at 17 digits.
void write_measure_csv(std::ostream& out, const DiscreteMeasure& m);
DiscreteMeasure read_measure_csv(std::istream& in);

/// Key-value block with keys d, ratios, offsets, weights.
std::string ifs_to_config(const IfsSystem& ifs);
IfsSystem ifs_from_config(const std::string& text);

}  // namespace falconer::measures
