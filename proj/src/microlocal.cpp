#include "falconer/microlocal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "falconer/errors.hpp"
#include "falconer/parallel.hpp"

namespace falconer::microlocal {

namespace {

std::vector<int> parse_side(const std::string& text) {
  std::vector<int> out;
  std::string clean;
  for (char c : text)
    if (c != ' ' && c != '\t') clean += c;
  if (clean.empty()) return out;
  if (clean.find(',') != std::string::npos) {
    std::stringstream ss(clean);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty() || !std::all_of(item.begin(), item.end(), ::isdigit))
        throw ConfigurationError("partition entry '" + item + "' is not an index");
      out.push_back(std::stoi(item));
    }
  } else {
    for (char c : clean) {
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw ConfigurationError(std::string("partition character '") + c + "' is not a digit");
      out.push_back(c - '0');
    }
  }
  return out;
}

double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dist2(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

/// y^1..y^{k-1} as (k-1) blocks, last block radius * omega.
std::vector<double> full_y(const ConfigurationSpec& spec, const ConormalParameters& p, double radius) {
  std::vector<double> y(p.ybar);
  for (int a = 0; a < spec.d; ++a) y.push_back(radius * p.omega[a]);
  return y;
}

/// Root of 1/2 Y^T Q Y = t in the radius of the last block, Newton from the
/// Euclidean radius.
double perturbed_radius(const ConfigurationSpec& spec, const ConormalParameters& p,
                        const Eigen::MatrixXd& q, double start) {
  const int n = (spec.k - 1) * spec.d;
  const int last = (spec.k - 2) * spec.d;
  Eigen::VectorXd y(n);
  for (int a = 0; a < last; ++a) y[a] = p.ybar[a];
  double rho = start;
  for (int step = 0; step < 20; ++step) {
    for (int a = 0; a < spec.d; ++a) y[last + a] = rho * p.omega[a];
    Eigen::VectorXd qy = q * y;
    double f = 0.5 * y.dot(qy) - spec.t;
    double df = 0.0;
    for (int a = 0; a < spec.d; ++a) df += qy[last + a] * p.omega[a];
    if (!(std::abs(df) > 0.0)) break;
    double delta = f / df;
    rho -= delta;
    if (!std::isfinite(rho) || rho <= 0.0) break;
    if (std::abs(delta) <= 1e-15 * std::max(1.0, rho)) return rho;
  }
  throw PerturbationError("perturbed level set: Newton correction did not converge in 20 steps");
}

/// Left coordinates (x^i, xi^i), i in spec.left, of a parameter vector.
Eigen::VectorXd left_coordinates(const ConfigurationSpec& spec, const ConormalParameters& base,
                                 const Eigen::MatrixXd& frame, const Eigen::VectorXd& p,
                                 const QuadraticForm& form) {
  const int d = spec.d;
  ConormalParameters q;
  q.x0.assign(p.data(), p.data() + d);
  q.ybar.assign(p.data() + d, p.data() + (spec.k - 1) * d);
  Eigen::VectorXd c = p.segment((spec.k - 1) * d, d - 1);
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(base.omega.data(), d) + frame * c;
  w.normalize();
  q.omega.assign(w.data(), w.data() + d);
  q.tau = p[spec.k * d - 1];
  ConormalPoint pt = conormal_point(spec, q, form);
  Eigen::VectorXd out(2 * spec.d_left());
  int row = 0;
  for (int i : spec.left) {
    for (int a = 0; a < d; ++a) out[row++] = pt.x[i * d + a];
    for (int a = 0; a < d; ++a) out[row++] = pt.xi[i * d + a];
  }
  return out;
}

bool is_k3_split(const ConfigurationSpec& spec) {
  return spec.k == 3 && spec.left.size() == 1 && spec.left[0] == 0;
}

/// Rows of point 0 against columns x0, omega chart, tau.
double determinant_from_jacobian(const ConfigurationSpec& spec, const Eigen::MatrixXd& j) {
  const int d = spec.d;
  Eigen::MatrixXd block(2 * d, 2 * d);
  block.leftCols(d) = j.block(0, 0, 2 * d, d);
  block.rightCols(d) = j.block(0, spec.k * d - d, 2 * d, d);
  return block.determinant();
}

}  // namespace

std::string ConfigurationSpec::partition_string() const {
  std::string out;
  auto side = [&](const std::vector<int>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (k > 10 && i > 0) out += ',';
      out += std::to_string(v[i]);
    }
  };
  side(left);
  out += '|';
  side(right);
  return out;
}

void ConfigurationSpec::validate() const {
  if (d < 2) throw ConfigurationError("configuration needs d >= 2");
  if (k < 3) throw ConfigurationError("configuration needs k >= 3");
  if (!(t > 0.0)) throw ConfigurationError("configuration needs t > 0");
  if (left.empty()) throw ConfigurationError("partition left side must be nonempty");
  std::vector<int> seen(static_cast<std::size_t>(k), 0);
  for (const auto* side : {&left, &right})
    for (int i : *side) {
      if (i < 0 || i >= k)
        throw ConfigurationError("partition index " + std::to_string(i) + " outside 0.." +
                                 std::to_string(k - 1));
      if (seen[i]++) throw ConfigurationError("partition index " + std::to_string(i) + " repeated");
    }
  for (int i = 0; i < k; ++i)
    if (!seen[i]) throw ConfigurationError("partition misses index " + std::to_string(i));
}

void parse_partition(const std::string& text, int k, std::vector<int>& left,
                     std::vector<int>& right) {
  auto bar = text.find('|');
  if (bar == std::string::npos || text.find('|', bar + 1) != std::string::npos)
    throw ConfigurationError("partition '" + text + "' needs exactly one '|'");
  left = parse_side(text.substr(0, bar));
  right = parse_side(text.substr(bar + 1));
  ConfigurationSpec probe{2, k, 1.0, left, right};
  probe.validate();
}

ConfigurationSpec threshold_spec(int d, int k, double t) {
  ConfigurationSpec spec{d, k, t, {}, {}};
  int left_count = k == 3 ? 1 : (k % 2 == 0 ? k / 2 : (k - 1) / 2);
  for (int i = 0; i < k; ++i) (i < left_count ? spec.left : spec.right).push_back(i);
  spec.validate();
  return spec;
}

ConfigurationSpec make_spec(int d, int k, double t, const std::string& partition) {
  ConfigurationSpec spec{d, k, t, {}, {}};
  parse_partition(partition, k, spec.left, spec.right);
  spec.validate();
  return spec;
}

double phi(int d, int k, std::span<const double> points) {
  if (points.size() != static_cast<std::size_t>(d * k))
    throw ConfigurationError("phi: expected k blocks of d coordinates");
  double acc = 0.0;
  for (int i = 1; i < k; ++i) acc += dist2(points.data(), points.data() + i * d, d);
  return 0.5 * acc;
}

Eigen::MatrixXd QuadraticForm::matrix(int n) const {
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
  if (euclidean()) return q;
  if (a.rows() != n || a.cols() != n)
    throw ConfigurationError("perturbation matrix must be " + std::to_string(n) + "x" +
                             std::to_string(n));
  return q + epsilon * a;
}

Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = standard_normal(rng);
  Eigen::MatrixXd s = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  return s / eig.eigenvalues().cwiseAbs().maxCoeff();
}

QuadraticForm make_perturbation(double epsilon, Eigen::MatrixXd a) {
  if (!(epsilon >= 0.0 && epsilon <= 0.05))
    throw DomainError("perturbation epsilon must lie in [0, 0.05]");
  if (a.rows() != a.cols()) throw DomainError("perturbation matrix must be square");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw DomainError("perturbation matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().cwiseAbs().maxCoeff() > 1.0 + 1e-12)
    throw DomainError("perturbation matrix must have operator norm at most 1");
  return {epsilon, std::move(a)};
}

ConormalPoint conormal_point(const ConfigurationSpec& spec, const ConormalParameters& params,
                             const QuadraticForm& form) {
  const int d = spec.d, k = spec.k;
  if (params.x0.size() != static_cast<std::size_t>(d) ||
      params.ybar.size() != static_cast<std::size_t>((k - 2) * d) ||
      params.omega.size() != static_cast<std::size_t>(d))
    throw DomainError("conormal parameters have the wrong shape");
  if (std::abs(std::sqrt(dot(params.omega.data(), params.omega.data(), d)) - 1.0) > 1e-12)
    throw DomainError("omega must be a unit vector");
  if (params.tau == 0.0) throw DomainError("tau must be nonzero");
  double ysum = dot(params.ybar.data(), params.ybar.data(), (k - 2) * d);
  if (!(ysum < 2.0 * spec.t)) throw DomainError("sum |y^i|^2 must be below 2t");

  ConormalPoint pt;
  pt.params = params;
  pt.radius = std::sqrt(2.0 * spec.t - ysum);
  const int n = (k - 1) * d;
  if (!form.euclidean()) pt.radius = perturbed_radius(spec, params, form.matrix(n), pt.radius);
  std::vector<double> y = full_y(spec, params, pt.radius);

  for (int i = 0; i < k - 1; ++i) {
    if (dot(&y[i * d], &y[i * d], d) == 0.0) throw DomainError("y^i must be nonzero");
    for (int j = i + 1; j < k - 1; ++j)
      if (dist2(&y[i * d], &y[j * d], d) == 0.0) throw DomainError("y^i must be distinct");
  }

  std::vector<double> g = y;
  if (!form.euclidean()) {
    Eigen::VectorXd qy = form.matrix(n) * Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    g.assign(qy.data(), qy.data() + n);
  }
  pt.x.assign(static_cast<std::size_t>(k * d), 0.0);
  pt.xi.assign(static_cast<std::size_t>(k * d), 0.0);
  for (int a = 0; a < d; ++a) pt.x[a] = params.x0[a];
  for (int i = 1; i < k; ++i)
    for (int a = 0; a < d; ++a) {
      pt.x[i * d + a] = params.x0[a] + y[(i - 1) * d + a];
      pt.xi[i * d + a] = params.tau * g[(i - 1) * d + a];
      pt.xi[a] -= params.tau * g[(i - 1) * d + a];
    }
  return pt;
}

ConormalParameters sample_parameters(const ConfigurationSpec& spec, Rng& rng, double margin,
                                     int max_tries) {
  const int d = spec.d, k = spec.k;
  const int m = (k - 2) * d;
  const double radius = std::sqrt(1.8 * spec.t);
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    ConormalParameters p;
    for (int a = 0; a < d; ++a) p.x0.push_back(uniform(rng, -1.0, 1.0));
    double norm = 0.0;
    for (int a = 0; a < m; ++a) {
      p.ybar.push_back(standard_normal(rng));
      norm += p.ybar.back() * p.ybar.back();
    }
    double scale = radius * std::pow(uniform01(rng), 1.0 / m) / std::sqrt(norm);
    for (auto& v : p.ybar) v *= scale;
    double wn = 0.0;
    for (int a = 0; a < d; ++a) {
      p.omega.push_back(standard_normal(rng));
      wn += p.omega.back() * p.omega.back();
    }
    wn = std::sqrt(wn);
    for (auto& v : p.omega) v /= wn;
    p.tau = uniform(rng, 0.5, 2.0) * (uniform01(rng) < 0.5 ? -1.0 : 1.0);

    double ysum = dot(p.ybar.data(), p.ybar.data(), m);
    auto y = full_y(spec, p, std::sqrt(2.0 * spec.t - ysum));
    bool ok = true;
    const double m2 = margin * margin;
    for (int i = 0; i < k - 1 && ok; ++i) {
      ok = dot(&y[i * d], &y[i * d], d) >= m2;
      for (int j = i + 1; j < k - 1 && ok; ++j) ok = dist2(&y[i * d], &y[j * d], d) >= m2;
    }
    if (ok) return p;
  }
  throw SamplingError("no admissible point of U_t after " + std::to_string(max_tries) + " draws");
}

Eigen::MatrixXd tangent_frame(std::span<const double> omega) {
  const int d = static_cast<int>(omega.size());
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(omega.data(), d).normalized();
  Eigen::MatrixXd frame(d, d - 1);
  int filled = 0;
  for (int e = 0; e < d && filled < d - 1; ++e) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(d, e);
    v -= v.dot(w) * w;
    for (int c = 0; c < filled; ++c) v -= v.dot(frame.col(c)) * frame.col(c);
    if (v.norm() < 1e-6) continue;  // e nearly parallel to the span so far
    frame.col(filled++) = v.normalized();
  }
  return frame;
}

Eigen::MatrixXd jacobian_pi_L(const ConfigurationSpec& spec, const ConormalParameters& params,
                              double h, const QuadraticForm& form) {
  if (!(h >= 1e-6 && h <= 1e-4)) throw DomainError("jacobian step must lie in [1e-6, 1e-4]");
  const int d = spec.d, n = spec.parameter_count();
  Eigen::MatrixXd frame = tangent_frame(params.omega);
  Eigen::VectorXd p(n);
  for (int a = 0; a < d; ++a) p[a] = params.x0[a];
  for (int a = 0; a < (spec.k - 2) * d; ++a) p[d + a] = params.ybar[a];
  p.segment((spec.k - 1) * d, d - 1).setZero();
  p[n - 1] = params.tau;

  Eigen::MatrixXd jac(2 * spec.d_left(), n);
  for (int c = 0; c < n; ++c) {
    for (double step = h;; step *= 0.5) {
      try {
        Eigen::VectorXd plus = p, minus = p;
        plus[c] += step;
        minus[c] -= step;
        jac.col(c) = (left_coordinates(spec, params, frame, plus, form) -
                      left_coordinates(spec, params, frame, minus, form)) /
                     (2.0 * step);
        break;
      } catch (const DomainError&) {
        if (step * 0.5 < 1e-6) throw DomainError("finite-difference stencil leaves U_t");
      }
    }
  }
  return jac;
}

int numerical_rank(const Eigen::MatrixXd& m, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > tol * s[0]) ++rank;
  return rank;
}

double k3_determinant(const ConfigurationSpec& spec, const ConormalParameters& params, double h,
                      const QuadraticForm& form) {
  if (!is_k3_split(spec)) throw ConfigurationError("k3_determinant needs k = 3 and split (0|12)");
  return determinant_from_jacobian(spec, jacobian_pi_L(spec, params, h, form));
}

std::optional<int> rank_bound(const ConfigurationSpec& spec) {
  ConfigurationSpec reference = threshold_spec(spec.d, spec.k, spec.t);
  if (spec.left != reference.left) return std::nullopt;
  if (spec.k == 3) return 2 * spec.d;
  if (spec.k % 2 == 0) return (spec.k + 2) * spec.d / 2 + 1;
  return (spec.k + 1) * spec.d / 2 + 1;
}

bool RankReport::pass() const {
  if (bound && min_rank < *bound) return false;
  for (const auto& s : samples)
    if (s.determinant && !(std::abs(*s.determinant) > 1e-8)) return false;
  return true;
}

RankReport rank_check(const ConfigurationSpec& spec, int samples, double tol, std::uint64_t seed,
                      const QuadraticForm& form) {
  spec.validate();
  if (samples < 1) throw ConfigurationError("rank_check needs at least one sample");
  if (!(tol > 0.0)) throw ConfigurationError("rank tolerance must be positive");
  RankReport report{spec, tol, form.epsilon, 0, rank_bound(spec), {}};
  report.samples.resize(static_cast<std::size_t>(samples));
  parallel_for(report.samples.size(), [&](std::size_t s) {
    Rng rng = make_stream(seed, s);
    RankSample& out = report.samples[s];
    out.params = sample_parameters(spec, rng);
    Eigen::MatrixXd jac = jacobian_pi_L(spec, out.params, 1e-5, form);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    const auto& sv = svd.singularValues();
    out.sigma_max = sv.size() ? sv[0] : 0.0;
    out.rank = numerical_rank(jac, tol);
    out.sigma_min_kept = out.rank > 0 ? sv[out.rank - 1] : 0.0;
    if (is_k3_split(spec)) out.determinant = determinant_from_jacobian(spec, jac);
  });
  report.min_rank = report.samples.front().rank;
  for (const auto& s : report.samples) report.min_rank = std::min(report.min_rank, s.rank);
  return report;
}

RankReport perturbed_rank_check(const ConfigurationSpec& spec, double epsilon,
                                const Eigen::MatrixXd& a, int samples, double tol,
                                std::uint64_t seed) {
  return rank_check(spec, samples, tol, seed, make_perturbation(epsilon, a));
}

CorankLoss corank_and_loss(const ConfigurationSpec& spec, int observed_rank) {
  CorankLoss out;
  out.corank = std::min(spec.parameter_count(), 2 * spec.d_left()) - observed_rank;
  out.beta = (spec.k - 2) * spec.d / 4.0 - 0.5;
  out.loss = 2.0 * out.beta;
  return out;
}

Rational::Rational(long long n, long long d) {
  if (d == 0) throw DomainError("rational with zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  long long g = std::gcd(n < 0 ? -n : n, d);
  num = n / g;
  den = d / g;
}

std::string Rational::str() const { return std::to_string(num) + "/" + std::to_string(den); }

Rational operator-(const Rational& a, const Rational& b) {
  return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
}

Rational operator+(const Rational& a, const Rational& b) {
  return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
}

bool operator<(const Rational& a, const Rational& b) { return a.num * b.den < b.num * a.den; }

Rational threshold(int d, int k, ThresholdVariant variant) {
  if (d < 2 || k < 3) throw DomainError("threshold needs d >= 2 and k >= 3");
  if (variant == ThresholdVariant::bilinear) return Rational((k - 1) * d + 1, k);
  if (k == 3) return Rational(2 * d + 1, 3);
  return Rational((k - 1) * d, k);
}

BasePoint find_base_point(const measures::DiscreteMeasure& m, int k, std::uint64_t seed,
                          double margin, int max_tries) {
  if (k < 2) throw DomainError("base point needs k >= 2");
  const int d = m.dim();
  Rng rng = make_stream(seed, 0);
  WeightedPicker pick(m.weights());
  BasePoint out;
  out.points.resize(static_cast<std::size_t>(k * d));
  for (int attempt = 1; attempt <= max_tries; ++attempt) {
    for (int i = 0; i < k; ++i) {
      auto p = m.point(pick(rng));
      std::copy(p.begin(), p.end(), out.points.begin() + i * d);
    }
    bool ok = true;
    for (int i = 0; i < k && ok; ++i)
      for (int j = i + 1; j < k && ok; ++j)
        ok = dist2(&out.points[i * d], &out.points[j * d], d) >= margin * margin;
    if (ok) {
      out.t0 = phi(d, k, out.points);
      out.attempts = attempt;
      return out;
    }
  }
  throw SamplingError("no base point with separation " + std::to_string(margin) + " after " +
                      std::to_string(max_tries) + " draws");
}

}  // namespace falconer::microlocal
