#include "falconer/fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "falconer/errors.hpp"

namespace falconer {

LinearFit fit_linear(std::span<const double> x, int cols, std::span<const double> y) {
  const auto rows = static_cast<Eigen::Index>(y.size());
  if (cols < 1 || x.size() != y.size() * static_cast<std::size_t>(cols))
    throw DomainError("fit_linear: design matrix shape does not match y");
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = x[i * cols + j];
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(y.data(), rows);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  LinearFit out;
  if (cod.rank() < cols)
    out.warnings.push_back("ill-conditioned design: rank " + std::to_string(cod.rank()) + " of " +
                           std::to_string(cols));
  Eigen::VectorXd c = cod.solve(b);
  out.coefficients.assign(c.data(), c.data() + cols);
  out.residual = rows > 0 ? std::sqrt((a * c - b).squaredNorm() / static_cast<double>(rows)) : 0.0;
  return out;
}

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("fit_loglog: x and y lengths differ");
  if (x.size() < 3) throw DomainError("fit_loglog: need at least 3 samples");
  std::vector<double> design, logy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0)) throw DomainError("fit_loglog: y must be positive");
    if (!(x[i] > 0.0)) throw DomainError("fit_loglog: x must be positive");
    design.push_back(std::log(x[i]));
    design.push_back(1.0);
    logy.push_back(std::log(y[i]));
  }
  LinearFit lin = fit_linear(design, 2, logy);
  LogLogFit out{lin.coefficients[0], lin.coefficients[1], lin.residual, lin.warnings};
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    out.warnings.push_back("ill-conditioned: repeated x values");
  return out;
}

std::vector<std::pair<double, double>> local_maxima(std::span<const double> x,
                                                    std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("local_maxima: x and y lengths differ");
  std::vector<std::pair<double, double>> peaks;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    double v = std::abs(y[i]);
    if (v > std::abs(y[i - 1]) && v >= std::abs(y[i + 1])) peaks.emplace_back(x[i], v);
  }
  return peaks;
}

}  // namespace falconer
