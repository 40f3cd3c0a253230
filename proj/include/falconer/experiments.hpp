#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "falconer/config.hpp"
#include "falconer/measures.hpp"
#include "falconer/microlocal.hpp"
#include "falconer/report.hpp"

namespace falconer::lab {

/// Documented configuration key of one experiment.
struct KeySpec {
  std::string name;
  std::string fallback;
  std::string help;
  bool required = false;
};

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::vector<KeySpec> keys;
};

/// Every subcommand with its keys, in CLI order.
const std::vector<ExperimentInfo>& experiments();
const ExperimentInfo& experiment(const std::string& name);

/// Config file entries (optionally under a `[<subcommand>]` section) merged
/// with overrides and defaults. Throws ConfigurationError naming an unknown
/// key with its nearest valid key, or a missing required key.
KeyValueConfig resolve_settings(const ExperimentInfo& info, const KeyValueConfig& file,
                                const std::map<std::string, std::string>& overrides);

// Experiments. Each validates its parameters, computes, and returns the
// report; nothing is written.

struct GenParams {
  int d = 2;
  double ratio = 1.0 / 3.0;
  int branches = 4;
  std::size_t n = 10000;
  int depth = 20;
  std::uint64_t seed = 1;
};
ExperimentReport run_gen(const GenParams& p, measures::DiscreteMeasure* sample = nullptr);

struct FtParams {
  GenParams source;
  std::string measure_path;  ///< empty: chaos-game sample of `source`
  double extent = 8.0;
  double spacing = 0.25;
};
ExperimentReport run_ft(const FtParams& p, std::string* spectral_csv = nullptr);

struct DecayFitParams {
  int d = 2;
  int grid = 64;
  int imin = 2;
  int imax = 5;
  double r = 1.0;
  int trials = 32;
  double slope_tol = 0.2;
  double min_slack = 0.2;
  std::uint64_t seed = 1;
};
ExperimentReport run_decay_fit(const DecayFitParams& p);

struct BilinearNormParams {
  int d = 2;
  int i = 3;
  int j = 4;
  double r = 1.0;
  int grid = 64;
  int trials = 32;
  std::uint64_t seed = 1;
};
ExperimentReport run_bilinear_norm(const BilinearNormParams& p);

/// Gaussian density exp(-|x - c|^2 / (2 sigma^2)) sampled at the cell
/// centres of a grid^d lattice spanning c +- 6.4 sigma, unit mass.
measures::DiscreteMeasure gaussian_grid_measure(int d, int grid, double sigma,
                                                const std::vector<double>& centre);

struct DistsetParams {
  int d = 2;
  double sigma = 0.2;
  std::vector<double> centre{0.1, -0.05};
  int grid = 64;
  std::size_t samples = 1000000;
  double rmin = 0.5;
  double rmax = 2.0;
  int radii = 16;
  double spacing = 0.1;
  double extent = 4.0;
  double tol = 0.05;
  std::uint64_t seed = 1;
};
ExperimentReport run_distset(const DistsetParams& p);

struct EnergyParams {
  std::size_t n = 10000;
  std::vector<double> s{0.3, 0.5, 0.7};
  double spacing = 0.05;
  double extent = 100.0;
  double spatial_tol = 0.02;
  double ratio_tol = 0.10;
  std::uint64_t seed = 1;
};
ExperimentReport run_energy(const EnergyParams& p);

struct BandsParams {
  int d = 2;
  double ratio = 1.0 / 3.0;
  int branches = 4;
  int depth = 10;
  double spacing = 0.5;
  int jmin = 3;
  int jmax = 7;
  double slack = 0.1;
};
ExperimentReport run_bands(const BandsParams& p);

struct RankCheckParams {
  int d = 2;
  int k = 3;
  std::string partition;  ///< empty: the threshold split
  double t = 1.0;
  int samples = 100;
  double tol = 1e-8;
  double epsilon = 0.0;
  std::uint64_t seed = 1;
};
/// Report plus the JSON document {spec, min_rank, bound, pass, per_sample}.
ExperimentReport run_rank_check(const RankCheckParams& p, std::string* json_out = nullptr);

struct RunRequest {
  std::string subcommand;
  std::string config_path;  ///< empty: defaults and overrides only
  std::map<std::string, std::string> overrides;
  std::string out_dir = "falconer_out";
  std::optional<std::uint64_t> seed;
};

/// Resolves settings, runs the experiment and writes its outputs to
/// out_dir. Returns 0 on pass, 2 on a failed verdict, 1 on any error
/// (reported on `err`, with no output files created).
int run(const RunRequest& request, std::ostream& out, std::ostream& err);

}  // namespace falconer::lab
