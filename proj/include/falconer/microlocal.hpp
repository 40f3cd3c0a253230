#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falconer/measures.hpp"
#include "falconer/random.hpp"

namespace falconer::microlocal {

/// Diagonal k-point configuration problem with a bipartite split of the
/// point indices 0..k-1.
struct ConfigurationSpec {
  int d = 2;
  int k = 3;
  double t = 1.0;
  std::vector<int> left;
  std::vector<int> right;

  int d_left() const { return static_cast<int>(left.size()) * d; }
  int d_right() const { return static_cast<int>(right.size()) * d; }
  /// Number of parameters x0, y^1..y^{k-2}, omega chart, tau.
  int parameter_count() const { return k * d; }
  /// Text form like `01|23`.
  std::string partition_string() const;

  /// Throws ConfigurationError unless the split covers 0..k-1 disjointly
  /// with a nonempty left side, d >= 2, k >= 3 and t > 0.
  void validate() const;
};

/// Splits `01|23` or `0,1|2,3` into index lists.
void parse_partition(const std::string& text, int k, std::vector<int>& left,
                     std::vector<int>& right);

/// The split used for the threshold argument: (0|12) for k = 3,
/// (0..(k-2)/2 | k/2..k-1) for even k, (0..(k-3)/2 | (k-1)/2..k-1) for odd k >= 5.
ConfigurationSpec threshold_spec(int d, int k, double t = 1.0);

/// Spec with an explicit partition string.
ConfigurationSpec make_spec(int d, int k, double t, const std::string& partition);

/// 1/2 sum_{i>=1} |x^0 - x^i|^2; `points` holds k blocks of d coordinates.
double phi(int d, int k, std::span<const double> points);

/// Symmetric perturbation Q = I + eps A of the quadratic form on
/// R^{(k-1)d}. eps = 0 selects the Euclidean closed forms exactly.
struct QuadraticForm {
  double epsilon = 0.0;
  Eigen::MatrixXd a;  ///< empty when epsilon = 0

  bool euclidean() const { return epsilon == 0.0; }
  Eigen::MatrixXd matrix(int n) const;
};

/// Random symmetric n x n matrix with operator norm exactly 1.
Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed);

/// Builds a perturbation; throws DomainError unless |A| <= 1 and 0 <= eps <= 0.05.
QuadraticForm make_perturbation(double epsilon, Eigen::MatrixXd a);

/// Coordinates on the conormal bundle: (x0, ybar, omega, tau).
struct ConormalParameters {
  std::vector<double> x0;     ///< d
  std::vector<double> ybar;   ///< (k-2) d
  std::vector<double> omega;  ///< unit vector, d
  double tau = 1.0;
};

struct ConormalPoint {
  ConormalParameters params;
  double radius = 0.0;        ///< r(ybar, t), or the perturbed level-set root
  std::vector<double> x;      ///< k blocks of d
  std::vector<double> xi;     ///< k blocks of d
};

/// Phase-space point. Throws DomainError outside U_t (ball condition,
/// nonzero and distinct y's), PerturbationError when the perturbed level
/// set root does not converge in 20 Newton steps.
ConormalPoint conormal_point(const ConfigurationSpec& spec, const ConormalParameters& params,
                             const QuadraticForm& form = {});

/// Draw from U_t: x0 uniform in [-1,1]^d, ybar uniform in the ball
/// sum |y^i|^2 <= 1.8 t, omega uniform, tau in +-[0.5, 2], with |y^i| and
/// |y^i - y^j| at least `margin`. Throws SamplingError after `max_tries`.
ConormalParameters sample_parameters(const ConfigurationSpec& spec, Rng& rng,
                                     double margin = 0.05, int max_tries = 100000);

/// Orthonormal basis of the tangent space of S^{d-1} at omega (Gram-Schmidt).
Eigen::MatrixXd tangent_frame(std::span<const double> omega);

/// Central-difference Jacobian of the left coordinates (x^i, xi^i), i in the
/// left index list, with respect to the kd parameters. h in [1e-6, 1e-4];
/// the step is halved down to 1e-6 when a stencil leaves U_t.
Eigen::MatrixXd jacobian_pi_L(const ConfigurationSpec& spec, const ConormalParameters& params,
                              double h = 1e-5, const QuadraticForm& form = {});

/// Singular values above tol * max singular value.
int numerical_rank(const Eigen::MatrixXd& m, double tol);

/// det D(x^0, xi^0) / D(x^0, omega, tau) for the (0|12) split: rows of point 0,
/// columns x0, omega chart and tau.
double k3_determinant(const ConfigurationSpec& spec, const ConormalParameters& params,
                      double h = 1e-5, const QuadraticForm& form = {});

/// Rank lower bound of the threshold splits: 2d for k = 3, (k+2)d/2 + 1 for
/// even k, (k+1)d/2 + 1 for odd k >= 5. Empty for other splits.
std::optional<int> rank_bound(const ConfigurationSpec& spec);

struct RankSample {
  ConormalParameters params;
  int rank = 0;
  double sigma_max = 0.0;
  double sigma_min_kept = 0.0;  ///< smallest singular value counted in the rank
  std::optional<double> determinant;  ///< k = 3 with left = {0}
};

struct RankReport {
  ConfigurationSpec spec;
  double tol = 1e-8;
  double epsilon = 0.0;
  int min_rank = 0;
  std::optional<int> bound;
  std::vector<RankSample> samples;

  bool pass() const;
};

/// Minimum numerical rank of D pi_L over `samples` random points of U_t.
RankReport rank_check(const ConfigurationSpec& spec, int samples, double tol, std::uint64_t seed,
                      const QuadraticForm& form = {});

/// Same with Q = I + eps A; ranks are taken on the perturbed level set.
RankReport perturbed_rank_check(const ConfigurationSpec& spec, double epsilon,
                                const Eigen::MatrixXd& a, int samples, double tol,
                                std::uint64_t seed);

struct CorankLoss {
  int corank = 0;     ///< min(kd, 2 d_L) - observed rank
  double beta = 0.0;  ///< (k-2)d/4 - 1/2
  double loss = 0.0;  ///< 2 beta
};

CorankLoss corank_and_loss(const ConfigurationSpec& spec, int observed_rank);

/// Exact rational p/q with q > 0 and gcd 1.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d);

  std::string str() const;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator+(const Rational& a, const Rational& b);
  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend bool operator<(const Rational& a, const Rational& b);
};

enum class ThresholdVariant { fio, bilinear };

/// (2d+1)/3 for k = 3 and (k-1)d/k for k >= 4 (fio); ((k-1)d+1)/k (bilinear).
Rational threshold(int d, int k, ThresholdVariant variant);

/// Base point: k-tuple drawn from m whose points are pairwise at least
/// `margin` apart, with t0 = phi of the tuple.
struct BasePoint {
  std::vector<double> points;
  double t0 = 0.0;
  int attempts = 0;
};

BasePoint find_base_point(const measures::DiscreteMeasure& m, int k, std::uint64_t seed,
                          double margin = 0.01, int max_tries = 100000);

}  // namespace falconer::microlocal
