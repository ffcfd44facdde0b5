#pragma once

#include <cstdint>
#include <vector>

namespace bbm {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Standard error of the slope from the residuals (0 for exact fits).
  double slope_se = 0.0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& x);
/// Standard error of the mean, sample variance with M - 1.
double standard_error(const std::vector<double>& x);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// p-quantile by linear interpolation of the order statistics.
double quantile(std::vector<double> x, double p);

/// Pearson correlation.
double correlation(const std::vector<double>& a, const std::vector<double>& b);

} // namespace bbm
