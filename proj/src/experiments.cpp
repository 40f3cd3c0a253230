#include "falconer/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "falconer/bilinear.hpp"
#include "falconer/errors.hpp"
#include "falconer/fit.hpp"
#include "falconer/spectral.hpp"

namespace falconer::lab {

namespace {

using nlohmann::ordered_json;

const std::string kThird = "0.33333333333333331";

std::vector<ExperimentInfo> build_catalogue() {
  const KeySpec seed{"seed", "1", "random seed (u64)"};
  const KeySpec d2{"d", "2", "ambient dimension"};
  return {
      {"gen",
       "chaos-game sample of a Cantor dust; writes measure.csv and ifs.cfg",
       {d2,
        {"ratio", kThird, "contraction ratio in (0, 1/2]"},
        {"branches", "4", "maps placed at cube corners (at most 2^d)"},
        {"n", "10000", "sample size"},
        {"depth", "20", "maps composed per sample"},
        seed}},
      {"ft",
       "direct Fourier transform of a measure on a frequency lattice; writes spectral.csv",
       {d2,
        {"ratio", kThird, "Cantor dust ratio when no measure file is given"},
        {"branches", "4", "Cantor dust branch count"},
        {"n", "2000", "sample size"},
        {"depth", "20", "maps composed per sample"},
        {"measure", "", "measure CSV to transform instead of a fresh sample"},
        {"extent", "8", "lattice reaches |xi_a| <= extent"},
        {"spacing", "0.25", "lattice spacing"},
        seed}},
      {"decay-fit",
       "bilinear spherical average norms over band pairs; writes decay-fit.csv",
       {d2,
        {"grid", "64", "frequency nodes per axis (half-width grid/2)"},
        {"imin", "2", "lowest band index"},
        {"imax", "5", "highest band index; sets the lattice spacing"},
        {"r", "1", "sphere radius"},
        {"trials", "32", "random band pairs per cell"},
        {"slope_tol", "0.2", "allowed deviation of the magnitude slope from -(2d-1)/2"},
        {"min_slack", "0.2", "allowed excess of the min-index slope over d/2"},
        seed}},
      {"bilinear-norm",
       "ratio |A_r(f,g)|/(|f||g|) for one band pair; writes bilinear-norm.csv",
       {d2,
        {"i", "3", "band of f"},
        {"j", "4", "band of g"},
        {"r", "1", "sphere radius"},
        {"grid", "64", "frequency nodes per axis"},
        {"trials", "32", "random band pairs"},
        seed}},
      {"distset",
       "distance density, Fourier formula against Monte Carlo pushforward; writes distset.csv",
       {d2,
        {"sigma", "0.2", "Gaussian width"},
        {"centre", "0.1,-0.05", "Gaussian centre (d reals)"},
        {"grid", "64", "spatial nodes per axis of the discretised density"},
        {"samples", "1000000", "pushforward tuples"},
        {"rmin", "0.5", "first radius"},
        {"rmax", "2", "last radius"},
        {"radii", "16", "radius count"},
        {"spacing", "0.1", "frequency lattice spacing"},
        {"extent", "4", "frequency lattice extent"},
        {"tol", "0.05", "allowed sup relative difference"},
        seed}},
      {"energy",
       "Riesz energy of a uniform sample on [0,1], spatial and frequency sides; writes energy.csv",
       {{"n", "10000", "iid sample size"},
        {"s", "0.3,0.5,0.7", "exponents in (0,1)"},
        {"spacing", "0.05", "frequency lattice spacing"},
        {"extent", "100", "frequency lattice extent"},
        {"spatial_tol", "0.02", "allowed relative error against 2/((1-s)(2-s))"},
        {"ratio_tol", "0.1", "allowed spread of frequency/spatial across s"},
        seed}},
      {"bands",
       "Littlewood-Paley band norms of a Cantor dust measure; writes bands.csv",
       {d2,
        {"ratio", kThird, "Cantor dust ratio"},
        {"branches", "4", "Cantor dust branch count"},
        {"depth", "10", "cylinder depth of the product formula"},
        {"spacing", "0.5", "frequency lattice spacing"},
        {"jmin", "3", "first band in the fit"},
        {"jmax", "7", "last band"},
        {"slack", "0.1", "allowed excess of the slope over (d-s)/2"}}},
      {"rank-check",
       "numerical rank of the left projection of the conormal bundle; writes rank-check.json",
       {{"d", "", "ambient dimension (>= 2)", true},
        {"k", "", "point count (>= 3)", true},
        {"partition", "", "split such as 01|23; empty selects the threshold split"},
        {"t", "1", "level of the configuration function"},
        {"samples", "100", "random points of U_t"},
        {"tol", "1e-8", "relative singular value cutoff"},
        {"epsilon", "0", "quadratic-form perturbation size (<= 0.05)"},
        seed}},
      {"threshold",
       "exact dimension threshold, printed as p/q",
       {{"d", "", "ambient dimension (>= 2)", true},
        {"k", "", "point count (>= 3)", true},
        {"variant", "fio", "fio or bilinear"}}},
  };
}

struct Reader {
  const KeyValueConfig& cfg;

  std::string str(const std::string& key) const { return cfg.require(key); }
  double real(const std::string& key) const { return parse_double(str(key), key); }
  int integer(const std::string& key) const {
    long long v = parse_int(str(key), key);
    if (v < -1000000000LL || v > 1000000000LL)
      throw ConfigurationError("`" + key + "`: value out of range");
    return static_cast<int>(v);
  }
  std::size_t count(const std::string& key) const {
    long long v = parse_int(str(key), key);
    if (v < 1) throw ConfigurationError("`" + key + "`: must be at least 1");
    return static_cast<std::size_t>(v);
  }
  std::uint64_t u64(const std::string& key) const {
    std::string t = str(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
      throw ConfigurationError("`" + key + "`: expected an unsigned 64-bit integer, got `" + t + "`");
    return v;
  }
  std::vector<double> list(const std::string& key) const {
    return parse_double_list(str(key), key);
  }
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigurationError(message);
}

ExperimentReport new_report(const std::string& name, std::uint64_t seed) {
  ExperimentReport r;
  r.name = name;
  r.seed = seed;
  return r;
}

ordered_json vec_json(const std::vector<double>& v) { return ordered_json(v); }

double log2_magnitude(int i, int j) {
  return 0.5 * std::log2(std::ldexp(1.0, 2 * i) + std::ldexp(1.0, 2 * j));
}

}  // namespace

const std::vector<ExperimentInfo>& experiments() {
  static const std::vector<ExperimentInfo> catalogue = build_catalogue();
  return catalogue;
}

const ExperimentInfo& experiment(const std::string& name) {
  for (const auto& e : experiments())
    if (e.name == name) return e;
  std::vector<std::string> names;
  for (const auto& e : experiments()) names.push_back(e.name);
  throw ConfigurationError("unknown subcommand `" + name + "` (nearest: `" +
                           nearest_key(name, names) + "`)");
}

KeyValueConfig resolve_settings(const ExperimentInfo& info, const KeyValueConfig& file,
                                const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> valid;
  for (const auto& k : info.keys) valid.push_back(k.name);
  auto known = [&](const std::string& key) {
    return std::find(valid.begin(), valid.end(), key) != valid.end();
  };
  auto unknown = [&](const std::string& key) {
    return ConfigurationError("unknown key `" + key + "` for " + info.name + " (nearest valid key: `" +
                              nearest_key(key, valid) + "`)");
  };

  KeyValueConfig merged;
  for (const auto& k : info.keys)
    if (!k.required) merged.set(k.name, k.fallback);
  for (const auto& [key, value] : file.entries()) {
    std::string local = key;
    if (auto dot = key.find('.'); dot != std::string::npos) {
      std::string section = key.substr(0, dot);
      if (section != info.name) {
        bool other = std::any_of(experiments().begin(), experiments().end(),
                                 [&](const ExperimentInfo& e) { return e.name == section; });
        if (other) continue;  // belongs to another subcommand
        throw unknown(key);
      }
      local = key.substr(dot + 1);
    }
    if (!known(local)) throw unknown(local);
    merged.set(local, value);
  }
  for (const auto& [key, value] : overrides) {
    if (!known(key)) throw unknown(key);
    merged.set(key, value);
  }
  for (const auto& k : info.keys)
    if (k.required && !merged.has(k.name))
      throw ConfigurationError("missing required key `" + k.name + "` for " + info.name);
  return merged;
}

ExperimentReport run_gen(const GenParams& p, measures::DiscreteMeasure* sample) {
  require(p.n >= 1, "gen: n must be at least 1");
  require(p.depth >= 1, "gen: depth must be at least 1");
  auto ifs = measures::build_cantor_dust(p.d, p.ratio, p.branches);
  auto m = measures::sample_self_similar(ifs, p.n, p.depth, p.seed);
  auto report = new_report("gen", p.seed);
  double dim = measures::similarity_dimension(ifs);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < m.size(); ++i) inside += ifs.bounding_box().contains(m.point(i));
  report.params = {{"similarity_dimension", dim},
                   {"points", static_cast<double>(m.size())},
                   {"total_mass", m.total_mass()},
                   {"inside_box", static_cast<double>(inside)}};
  report.fits["similarity_dimension"] = dim;
  report.add_verdict("unit mass", std::abs(m.total_mass() - 1.0) <= 1e-10,
                     std::abs(m.total_mass() - 1.0), 1e-10);
  report.add_verdict("attractor containment", inside == m.size(),
                     static_cast<double>(m.size() - inside), 0.0);
  if (sample) *sample = std::move(m);
  return report;
}

ExperimentReport run_ft(const FtParams& p, std::string* spectral_csv) {
  require(p.extent > 0.0 && p.spacing > 0.0, "ft: extent and spacing must be positive");
  measures::DiscreteMeasure m(1, {}, {});
  if (p.measure_path.empty()) {
    run_gen(p.source, &m);
  } else {
    std::ifstream in(p.measure_path);
    if (!in) throw ConfigurationError("ft: cannot open measure file " + p.measure_path);
    m = measures::read_measure_csv(in);
  }
  auto lattice = spectral::make_lattice(m.dim(), p.extent, p.spacing);
  auto field = spectral::measure_fourier(m, lattice);
  auto report = new_report("ft", p.source.seed);
  const auto origin = field.values[lattice.origin()];
  double zero_err = std::abs(origin - spectral::Complex(m.total_mass(), 0.0));
  double defect = field.hermitian_defect();
  report.params = {{"total_mass", m.total_mass()},
                   {"value_at_origin_re", origin.real()},
                   {"value_at_origin_im", origin.imag()},
                   {"hermitian_defect", defect},
                   {"lattice_half", static_cast<double>(lattice.half)},
                   {"l2_norm", field.l2_norm()}};
  double tol = 1e-10 * std::max(1.0, m.total_mass());
  report.add_verdict("value at 0 equals mass", zero_err <= tol, zero_err, tol);
  report.add_verdict("Hermitian symmetry", defect <= tol, defect, tol);
  if (spectral_csv) {
    std::ostringstream out;
    out << report.provenance();
    spectral::write_spectral_csv(out, field);
    *spectral_csv = out.str();
  }
  return report;
}

ExperimentReport run_decay_fit(const DecayFitParams& p) {
  require(p.d >= 1 && p.d <= 3, "decay-fit: d must lie in [1, 3]");
  require(p.trials >= 1, "decay-fit: trials must be at least 1");
  require(p.r > 0.0, "decay-fit: r must be positive");
  require(p.imin >= 0 && p.imax >= p.imin, "decay-fit: need 0 <= imin <= imax");
  require(p.imax - p.imin >= 1, "decay-fit: need at least two band indices to fit");
  auto cells = bilinear::decay_table(p.d, p.imin, p.imax, p.r, p.grid, p.trials, p.seed);
  auto report = new_report("decay-fit", p.seed);
  report.columns = {"d", "i", "j", "r", "ratio", "bound", "constant"};
  std::vector<double> magnitude, naive, logy;
  double constant = 0.0;
  for (const auto& c : cells) {
    report.rows.push_back({static_cast<double>(p.d), static_cast<double>(c.i),
                           static_cast<double>(c.j), p.r, c.ratio, c.bound, c.constant()});
    magnitude.insert(magnitude.end(),
                     {log2_magnitude(c.i, c.j), static_cast<double>(std::min(c.i, c.j)), 1.0});
    naive.insert(naive.end(), {static_cast<double>(std::max(c.i, c.j)),
                               static_cast<double>(std::min(c.i, c.j)), 1.0});
    logy.push_back(std::log2(c.ratio));
    constant = std::max(constant, c.constant());
  }
  auto fit = fit_linear(magnitude, 3, logy);
  auto raw = fit_linear(naive, 3, logy);
  const double target = -(2.0 * p.d - 1.0) / 2.0;
  report.fits = {{"magnitude_slope", fit.coefficients[0]},
                 {"min_slope", fit.coefficients[1]},
                 {"intercept", fit.coefficients[2]},
                 {"residual", fit.residual},
                 {"naive_max_slope", raw.coefficients[0]},
                 {"naive_min_slope", raw.coefficients[1]},
                 {"constant", constant}};
  for (const auto& w : fit.warnings) report.notes.push_back(w);
  report.notes.push_back(
      "magnitude_slope regresses log2(ratio) on log2|(2^i, 2^j)|, the variable of the bound; "
      "naive_* regress on max(i,j) directly");
  report.add_verdict("magnitude slope", std::abs(fit.coefficients[0] - target) <= p.slope_tol,
                     fit.coefficients[0], p.slope_tol,
                     "target " + format_real(target));
  report.add_verdict("min-index slope", fit.coefficients[1] <= p.d / 2.0 + p.min_slack,
                     fit.coefficients[1], p.d / 2.0 + p.min_slack);
  bool dominated = true;
  for (const auto& c : cells) dominated = dominated && c.ratio <= constant * c.bound * (1 + 1e-12);
  report.add_verdict("single constant dominates", dominated, constant, 0.0);
  return report;
}

ExperimentReport run_bilinear_norm(const BilinearNormParams& p) {
  require(p.trials >= 1, "bilinear-norm: trials must be at least 1");
  auto lat = bilinear::decay_lattice(p.d, p.grid, std::max(p.i, p.j));
  double ratio = bilinear::band_pair_ratio(p.d, p.i, p.j, p.r, lat, p.trials, p.seed);
  double bound = bilinear::band_pair_bound(p.d, p.i, p.j);
  auto report = new_report("bilinear-norm", p.seed);
  report.params = {{"ratio", ratio}, {"bound", bound}, {"constant", ratio / bound},
                   {"spacing", lat.spacing}};
  report.fits["constant"] = ratio / bound;
  report.add_verdict("finite ratio", std::isfinite(ratio) && ratio > 0.0, ratio, 0.0);
  return report;
}

measures::DiscreteMeasure gaussian_grid_measure(int d, int grid, double sigma,
                                                const std::vector<double>& centre) {
  require(d >= 1 && d <= 3, "gaussian measure: d must lie in [1, 3]");
  require(grid >= 2, "gaussian measure: grid must be at least 2");
  require(sigma > 0.0, "gaussian measure: sigma must be positive");
  require(centre.size() == static_cast<std::size_t>(d), "gaussian measure: centre needs d entries");
  const double half = 6.4 * sigma;
  const double cell = 2.0 * half / grid;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(grid);
  std::vector<double> coords, weights;
  double mass = 0.0;
  for (std::size_t f = 0; f < total; ++f) {
    std::size_t rest = f;
    double r2 = 0.0;
    std::vector<double> x(d);
    for (int a = d - 1; a >= 0; --a) {
      double off = -half + (static_cast<double>(rest % grid) + 0.5) * cell;
      rest /= grid;
      x[a] = centre[a] + off;
      r2 += off * off;
    }
    coords.insert(coords.end(), x.begin(), x.end());
    weights.push_back(std::exp(-r2 / (2.0 * sigma * sigma)));
    mass += weights.back();
  }
  for (double& w : weights) w /= mass;
  return measures::DiscreteMeasure(d, std::move(coords), std::move(weights));
}

ExperimentReport run_distset(const DistsetParams& p) {
  require(p.radii >= 2, "distset: radii must be at least 2");
  require(p.rmin > 0.0 && p.rmax > p.rmin, "distset: need 0 < rmin < rmax");
  require(p.samples >= 1, "distset: samples must be at least 1");
  auto m = gaussian_grid_measure(p.d, p.grid, p.sigma, p.centre);
  const double width = (p.rmax - p.rmin) / (p.radii - 1);
  std::vector<double> radii;
  for (int b = 0; b < p.radii; ++b) radii.push_back(p.rmin + b * width);
  auto edges = bilinear::uniform_edges(p.rmin - 0.5 * width, width, p.radii);
  auto push = bilinear::distance_density_pushforward(m, 3, edges, p.seed, p.samples);
  auto field = spectral::measure_fourier(m, spectral::make_lattice(p.d, p.extent, p.spacing));
  auto four = bilinear::distance_density_fourier(field, radii);

  auto report = new_report("distset", p.seed);
  report.columns = {"r", "density_pushforward", "density_fourier", "abs_rel_diff"};
  double sup = 0.0;
  for (double v : push.values) sup = std::max(sup, std::abs(v));
  if (!(sup > 0.0)) throw DegenerateInputError("distset: pushforward density vanishes on the radii");
  double worst = 0.0;
  for (std::size_t b = 0; b < radii.size(); ++b) {
    double diff = std::abs(four.values[b] - push.values[b]) / sup;
    worst = std::max(worst, diff);
    report.rows.push_back({radii[b], push.values[b], four.values[b], diff});
  }
  report.fits = {{"sup_rel_diff", worst},
                 {"imag_residue", four.imag_residue},
                 {"kept_fraction", push.kept_fraction}};
  report.add_verdict("fourier vs pushforward", worst <= p.tol, worst, p.tol);
  report.add_verdict("imaginary residue", four.imag_residue <= 1e-6, four.imag_residue, 1e-6);
  return report;
}

ExperimentReport run_energy(const EnergyParams& p) {
  require(p.n >= 2, "energy: n must be at least 2");
  require(!p.s.empty(), "energy: need at least one exponent");
  for (double s : p.s) require(s > 0.0 && s < 1.0, "energy: exponents must lie in (0, 1)");
  Rng rng = make_stream(p.seed, 0);
  std::vector<double> coords(p.n), weights(p.n, 1.0 / static_cast<double>(p.n));
  for (double& x : coords) x = uniform01(rng);
  measures::DiscreteMeasure m(1, coords, weights, measures::Box{{0.0}, {1.0}});
  auto field = spectral::measure_fourier(m, spectral::make_lattice(1, p.extent, p.spacing));

  auto report = new_report("energy", p.seed);
  double lo = HUGE_VAL, hi = -HUGE_VAL, raw_lo = HUGE_VAL, raw_hi = -HUGE_VAL;
  for (double s : p.s) {
    char label[32];
    std::snprintf(label, sizeof label, "_s%g", s);
    const std::string tag = label;
    double spatial = spectral::energy_spatial(m, s);
    double closed = 2.0 / ((1.0 - s) * (2.0 - s));
    auto fe = spectral::energy_frequency(field, s);
    double ratio = fe.normalized() / spatial;
    double raw_ratio = fe.raw / spatial;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    raw_lo = std::min(raw_lo, raw_ratio);
    raw_hi = std::max(raw_hi, raw_ratio);
    report.params.insert(report.params.end(), {{"spatial" + tag, spatial},
                                               {"closed_form" + tag, closed},
                                               {"frequency_raw" + tag, fe.raw},
                                               {"frequency_corrected" + tag, fe.corrected},
                                               {"gamma" + tag, fe.gamma},
                                               {"ratio" + tag, ratio}});
    double err = std::abs(spatial / closed - 1.0);
    report.add_verdict("spatial energy" + tag, err <= p.spatial_tol, err, p.spatial_tol);
  }
  double spread = hi / lo - 1.0;
  report.fits = {{"ratio_spread", spread}, {"raw_ratio_spread", raw_hi / raw_lo - 1.0}};
  report.add_verdict("frequency/spatial constant", spread <= p.ratio_tol, spread, p.ratio_tol);
  return report;
}

ExperimentReport run_bands(const BandsParams& p) {
  require(p.jmin >= 0 && p.jmax - p.jmin >= 2, "bands: need jmax - jmin >= 2");
  require(p.depth >= 1, "bands: depth must be at least 1");
  require(p.spacing > 0.0, "bands: spacing must be positive");
  auto ifs = measures::build_cantor_dust(p.d, p.ratio, p.branches);
  const double s = measures::similarity_dimension(ifs);
  int half = static_cast<int>(std::ceil(std::ldexp(1.0, p.jmax + 1) / p.spacing));
  spectral::Lattice lat{p.d, half, p.spacing};
  auto field = spectral::self_similar_fourier(ifs, p.depth, lat);
  auto bands = spectral::littlewood_paley(field, p.jmax);

  auto report = new_report("bands", 0);
  std::vector<double> design, logy;
  for (const auto& b : bands) {
    report.params.emplace_back("norm_j" + std::to_string(b.index), b.l2_norm);
    if (b.index >= p.jmin) {
      design.insert(design.end(), {static_cast<double>(b.index), 1.0});
      logy.push_back(std::log2(b.l2_norm));
    }
  }
  auto fit = fit_linear(design, 2, logy);
  const double limit = (p.d - s) / 2.0 + p.slack;
  report.fits = {{"slope", fit.coefficients[0]},
                 {"intercept", fit.coefficients[1]},
                 {"similarity_dimension", s},
                 {"limit", limit}};
  report.add_verdict("band norm slope", fit.coefficients[0] <= limit, fit.coefficients[0], limit);
  return report;
}

ExperimentReport run_rank_check(const RankCheckParams& p, std::string* json_out) {
  auto spec = p.partition.empty() ? microlocal::threshold_spec(p.d, p.k, p.t)
                                  : microlocal::make_spec(p.d, p.k, p.t, p.partition);
  require(p.samples >= 1, "rank-check: samples must be at least 1");
  require(p.tol > 0.0, "rank-check: tol must be positive");
  if (!(p.epsilon >= 0.0 && p.epsilon <= 0.05))
    throw ConfigurationError("rank-check: epsilon must lie in [0, 0.05]");
  microlocal::RankReport rr =
      p.epsilon == 0.0
          ? microlocal::rank_check(spec, p.samples, p.tol, p.seed)
          : microlocal::perturbed_rank_check(
                spec, p.epsilon, microlocal::random_symmetric((p.k - 1) * p.d, p.seed), p.samples,
                p.tol, p.seed);
  auto cl = microlocal::corank_and_loss(spec, rr.min_rank);

  auto report = new_report("rank-check", p.seed);
  report.columns = {"sample", "rank", "sigma_max", "sigma_min_kept", "determinant"};
  for (std::size_t s = 0; s < rr.samples.size(); ++s) {
    const auto& r = rr.samples[s];
    report.rows.push_back({static_cast<double>(s), static_cast<double>(r.rank), r.sigma_max,
                           r.sigma_min_kept, r.determinant.value_or(NAN)});
  }
  report.fits = {{"min_rank", static_cast<double>(rr.min_rank)},
                 {"corank", static_cast<double>(cl.corank)},
                 {"beta", cl.beta}};
  report.add_verdict("rank bound", rr.pass(), rr.min_rank, rr.bound.value_or(0));

  if (json_out) {
    ordered_json doc;
    doc["spec"] = {{"d", spec.d},
                   {"k", spec.k},
                   {"t", spec.t},
                   {"partition", spec.partition_string()},
                   {"d_left", spec.d_left()},
                   {"d_right", spec.d_right()},
                   {"tol", p.tol},
                   {"epsilon", p.epsilon},
                   {"seed", p.seed}};
    doc["min_rank"] = rr.min_rank;
    doc["bound"] = rr.bound ? ordered_json(*rr.bound) : ordered_json(nullptr);
    doc["pass"] = rr.pass();
    doc["corank"] = cl.corank;
    doc["beta"] = cl.beta;
    auto& per = doc["per_sample"] = ordered_json::array();
    for (const auto& r : rr.samples) {
      ordered_json e{{"x0", vec_json(r.params.x0)},
                     {"ybar", vec_json(r.params.ybar)},
                     {"omega", vec_json(r.params.omega)},
                     {"tau", r.params.tau},
                     {"rank", r.rank},
                     {"sigma_max", r.sigma_max},
                     {"sigma_min_kept", r.sigma_min_kept}};
      if (r.determinant) e["determinant"] = *r.determinant;
      per.push_back(std::move(e));
    }
    *json_out = doc.dump(2) + "\n";
  }
  return report;
}

int run(const RunRequest& request, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentInfo& info = experiment(request.subcommand);
    KeyValueConfig file =
        request.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(request.config_path);
    auto overrides = request.overrides;
    if (request.seed) {
      bool has_seed = std::any_of(info.keys.begin(), info.keys.end(),
                                  [](const KeySpec& k) { return k.name == "seed"; });
      if (!has_seed) throw ConfigurationError(info.name + " takes no seed");
      overrides["seed"] = std::to_string(*request.seed);
    }
    KeyValueConfig cfg = resolve_settings(info, file, overrides);
    Reader in{cfg};
    const std::string& name = info.name;

    if (name == "threshold") {
      std::string variant = in.str("variant");
      microlocal::ThresholdVariant v;
      if (variant == "fio") v = microlocal::ThresholdVariant::fio;
      else if (variant == "bilinear") v = microlocal::ThresholdVariant::bilinear;
      else throw ConfigurationError("`variant`: expected fio or bilinear, got `" + variant + "`");
      out << microlocal::threshold(in.integer("d"), in.integer("k"), v).str() << '\n';
      return 0;
    }

    // Parse every key before any computation or output.
    std::map<std::string, std::string> files;
    ExperimentReport report;
    auto started = utc_timestamp();
    auto t0 = std::chrono::steady_clock::now();
    auto gen_params = [&] {
      GenParams g;
      g.d = in.integer("d");
      g.ratio = in.real("ratio");
      g.branches = in.integer("branches");
      g.n = in.count("n");
      g.depth = in.integer("depth");
      g.seed = in.u64("seed");
      return g;
    };
    if (name == "gen") {
      auto g = gen_params();
      measures::DiscreteMeasure m(1, {}, {});
      report = run_gen(g, &m);
      std::ostringstream csv;
      measures::write_measure_csv(csv, m);
      files["measure.csv"] = csv.str();
      files["ifs.cfg"] =
          measures::ifs_to_config(measures::build_cantor_dust(g.d, g.ratio, g.branches));
    } else if (name == "ft") {
      FtParams f;
      f.source = gen_params();
      f.measure_path = in.str("measure");
      f.extent = in.real("extent");
      f.spacing = in.real("spacing");
      std::string csv;
      report = run_ft(f, &csv);
      files["spectral.csv"] = csv;
    } else if (name == "decay-fit") {
      DecayFitParams d;
      d.d = in.integer("d");
      d.grid = in.integer("grid");
      d.imin = in.integer("imin");
      d.imax = in.integer("imax");
      d.r = in.real("r");
      d.trials = in.integer("trials");
      d.slope_tol = in.real("slope_tol");
      d.min_slack = in.real("min_slack");
      d.seed = in.u64("seed");
      report = run_decay_fit(d);
    } else if (name == "bilinear-norm") {
      BilinearNormParams b;
      b.d = in.integer("d");
      b.i = in.integer("i");
      b.j = in.integer("j");
      b.r = in.real("r");
      b.grid = in.integer("grid");
      b.trials = in.integer("trials");
      b.seed = in.u64("seed");
      report = run_bilinear_norm(b);
    } else if (name == "distset") {
      DistsetParams d;
      d.d = in.integer("d");
      d.sigma = in.real("sigma");
      d.centre = in.list("centre");
      d.grid = in.integer("grid");
      d.samples = in.count("samples");
      d.rmin = in.real("rmin");
      d.rmax = in.real("rmax");
      d.radii = in.integer("radii");
      d.spacing = in.real("spacing");
      d.extent = in.real("extent");
      d.tol = in.real("tol");
      d.seed = in.u64("seed");
      report = run_distset(d);
    } else if (name == "energy") {
      EnergyParams e;
      e.n = in.count("n");
      e.s = in.list("s");
      e.spacing = in.real("spacing");
      e.extent = in.real("extent");
      e.spatial_tol = in.real("spatial_tol");
      e.ratio_tol = in.real("ratio_tol");
      e.seed = in.u64("seed");
      report = run_energy(e);
    } else if (name == "bands") {
      BandsParams b;
      b.d = in.integer("d");
      b.ratio = in.real("ratio");
      b.branches = in.integer("branches");
      b.depth = in.integer("depth");
      b.spacing = in.real("spacing");
      b.jmin = in.integer("jmin");
      b.jmax = in.integer("jmax");
      b.slack = in.real("slack");
      report = run_bands(b);
    } else if (name == "rank-check") {
      RankCheckParams r;
      r.d = in.integer("d");
      r.k = in.integer("k");
      r.partition = in.str("partition");
      r.t = in.real("t");
      r.samples = in.integer("samples");
      r.tol = in.real("tol");
      r.epsilon = in.real("epsilon");
      r.seed = in.u64("seed");
      std::string doc;
      report = run_rank_check(r, &doc);
      files["rank-check.json"] = doc;
    }
    report.started = started;
    report.duration_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.config = cfg.entries();

    if (name != "rank-check") {
      std::string csv = report.csv();
      if (!report.fits.empty()) {
        ordered_json footer(report.fits);
        csv += "# fit " + footer.dump() + "\n";
      }
      if (name != "gen" && name != "ft") files[name + ".csv"] = csv;
      files[name + ".json"] = report.json();
    } else {
      files["rank-check.report.json"] = report.json(false);
    }

    std::filesystem::create_directories(request.out_dir);
    for (const auto& [file_name, text] : files)
      write_text_atomic((std::filesystem::path(request.out_dir) / file_name).string(), text);

    for (const auto& v : report.verdicts)
      out << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << format_real(v.value)
          << " (tolerance " << format_real(v.tolerance) << ")" << (v.detail.empty() ? "" : " ")
          << v.detail << '\n';
    for (const auto& [k, v] : report.fits) out << "fit " << k << " = " << format_real(v) << '\n';
    return report.pass() ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace falconer::lab
