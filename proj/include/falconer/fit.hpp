#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace falconer {

struct LinearFit {
  std::vector<double> coefficients;
  double residual = 0.0;  ///< RMS of y - X c
  std::vector<std::string> warnings;
};

/// Least squares y ~ X c with X given row-major (`rows` x `cols`). Uses the
/// minimum-norm solution when X is rank deficient and records a warning.
LinearFit fit_linear(std::span<const double> x, int cols, std::span<const double> y);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;  ///< natural log of the prefactor
  double residual = 0.0;   ///< RMS in log space
  std::vector<std::string> warnings;
};

/// log y = intercept + slope log x. Needs >= 3 samples with x, y > 0;
/// repeated x values are flagged as ill-conditioned but still fitted.
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// Interior strict local maxima of |y| on a sampled curve, as (x, |y|).
std::vector<std::pair<double, double>> local_maxima(std::span<const double> x,
                                                    std::span<const double> y);

}  // namespace falconer
