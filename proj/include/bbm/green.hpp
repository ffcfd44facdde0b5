#pragma once

#include <span>
#include <vector>

#include "bbm/quadrature.hpp"

namespace bbm {

/// Transition density of d-dimensional Brownian motion at time t and
/// displacement length r: (2 pi t)^(-d/2) exp(-r^2 / 2t).
double heat_kernel(double t, double r, int dim);

/// Positive kernel of (lambda - Delta/2)^(-1) at separation r:
///   dim=1: exp(-kappa r) / kappa,   dim=3: exp(-kappa r) / (2 pi r),
/// with kappa = sqrt(2 lambda).
double green_kernel(double lambda, double r, int dim);

/// Free resolvent G_lambda = (lambda - Delta/2)^(-1) for real lambda >= 0.
class GreenKernel {
public:
  GreenKernel(int dim, double lambda);

  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  double kappa() const { return kappa_; }

  double operator()(double r) const { return green_kernel(lambda_, r, dim_); }

  /// Kernel in the scalar coordinate, so that (G f)(s) = int k(s, s') f(s') ds'.
  /// dim=1: exp(-kappa |s - s'|) / kappa.
  /// dim=3 (radial f): s' (exp(-kappa |s - s'|) - exp(-kappa (s + s'))) / (kappa s),
  /// and its kappa -> 0 limit 2 s' min(s, s') / s. Finite at s = 0.
  double reduced(double s, double sp) const;

  /// Far-field profile outside the support: exp(-kappa r) / r for dim=3
  /// (1 / r when lambda = 0), exp(-kappa |x|) for dim=1.
  double tail_shape(double s) const;

private:
  int dim_;
  double lambda_;
  double kappa_;
};

/// Quadrature weights `row` (size grid.size()) with (G f)(s) ~ sum_j row[j] f(x_j)
/// for f supported on the grid range. The panel containing s is integrated
/// by product quadrature split at s, which absorbs the kink of the kernel on
/// the diagonal.
void green_row(const GreenKernel& g, const QuadGrid& grid, double s, std::span<double> row);

/// (G f) at each target, f given by its values at the grid nodes.
std::vector<double> green_apply(const GreenKernel& g, const QuadGrid& grid,
                                const std::vector<double>& f, const std::vector<double>& targets);

/// dim=3 convenience wrapper for radial f.
std::vector<double> radial_green_apply(double lambda, const std::vector<double>& f,
                                       const QuadGrid& grid, const std::vector<double>& radii);

/// Coefficients c with (G f)(s) = c * tail_shape(s) beyond the grid range.
/// `right` applies for s >= hi; `left` (dim=1 only) for s <= lo.
struct TailCoefficients {
  double left = 0.0;
  double right = 0.0;
};

TailCoefficients exterior_coefficients(const GreenKernel& g, const QuadGrid& grid,
                                       const std::vector<double>& f);

} // namespace bbm
