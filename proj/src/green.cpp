#include "bbm/green.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bbm/errors.hpp"

namespace bbm {

namespace {

constexpr int kSplitOrder = 24;

const GaussRule& split_rule() {
  static const GaussRule rule = gauss_legendre(kSplitOrder);
  return rule;
}

} // namespace

double heat_kernel(double t, double r, int dim) {
  if (!(t > 0.0)) throw DomainError("heat_kernel: t must be positive");
  return std::pow(2.0 * std::numbers::pi * t, -0.5 * dim) * std::exp(-r * r / (2.0 * t));
}

double green_kernel(double lambda, double r, int dim) {
  if (lambda < 0.0) throw DomainError("green_kernel: lambda must be nonnegative");
  r = std::abs(r);
  const double kappa = std::sqrt(2.0 * lambda);
  if (dim == 1) {
    if (lambda == 0.0) throw DomainError("green_kernel: dim=1 requires lambda > 0");
    return std::exp(-kappa * r) / kappa;
  }
  if (dim == 3) {
    if (r == 0.0) throw DomainError("green_kernel: dim=3 kernel is singular at r=0");
    return std::exp(-kappa * r) / (2.0 * std::numbers::pi * r);
  }
  throw DomainError("green_kernel: dim must be 1 or 3");
}

GreenKernel::GreenKernel(int dim, double lambda)
    : dim_(dim), lambda_(lambda), kappa_(std::sqrt(2.0 * std::max(lambda, 0.0))) {
  if (dim != 1 && dim != 3) throw DomainError("GreenKernel: dim must be 1 or 3");
  if (!(lambda >= 0.0)) throw DomainError("GreenKernel: lambda must be nonnegative");
  if (dim == 1 && lambda == 0.0) throw DomainError("GreenKernel: dim=1 requires lambda > 0");
}

double GreenKernel::reduced(double s, double sp) const {
  if (dim_ == 1) return std::exp(-kappa_ * std::abs(s - sp)) / kappa_;
  const double lo = std::min(s, sp);
  const double hi = std::max(s, sp);
  if (kappa_ == 0.0) return s == 0.0 ? 2.0 * sp : 2.0 * sp * lo / s;
  if (s == 0.0) return 2.0 * sp * std::exp(-kappa_ * sp);
  return sp * std::exp(-kappa_ * (hi - lo)) * (-std::expm1(-2.0 * kappa_ * lo)) / (kappa_ * s);
}

double GreenKernel::tail_shape(double s) const {
  if (dim_ == 1) return std::exp(-kappa_ * std::abs(s));
  return std::exp(-kappa_ * s) / s;
}

void green_row(const GreenKernel& g, const QuadGrid& grid, double s, std::span<double> row) {
  const int q = grid.order;
  const GaussRule& sub = split_rule();
  std::vector<double> basis(q);
  for (const Panel& panel : grid.panels) {
    const std::size_t f = panel.first;
    if (s <= panel.a || s >= panel.b) {
      for (int j = 0; j < q; ++j)
        row[f + j] = g.reduced(s, grid.nodes[f + j]) * grid.line_weights[f + j];
      continue;
    }
    for (int j = 0; j < q; ++j) row[f + j] = 0.0;
    for (const auto& [a, b] : {std::pair{panel.a, s}, std::pair{s, panel.b}}) {
      const double half = 0.5 * (b - a);
      const double mid = 0.5 * (b + a);
      for (int m = 0; m < kSplitOrder; ++m) {
        const double sp = mid + half * sub.nodes[m];
        const double kw = g.reduced(s, sp) * half * sub.weights[m];
        lagrange_basis(grid, panel, sp, basis.data());
        for (int j = 0; j < q; ++j) row[f + j] += kw * basis[j];
      }
    }
  }
}

std::vector<double> green_apply(const GreenKernel& g, const QuadGrid& grid,
                                const std::vector<double>& f, const std::vector<double>& targets) {
  std::vector<double> out(targets.size());
  std::vector<double> row(grid.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    green_row(g, grid, targets[i], row);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * f[j];
    out[i] = acc;
  }
  return out;
}

std::vector<double> radial_green_apply(double lambda, const std::vector<double>& f,
                                       const QuadGrid& grid, const std::vector<double>& radii) {
  if (grid.dim != 3) throw DomainError("radial_green_apply: grid must be radial (dim=3)");
  return green_apply(GreenKernel(3, lambda), grid, f, radii);
}

TailCoefficients exterior_coefficients(const GreenKernel& g, const QuadGrid& grid,
                                       const std::vector<double>& f) {
  TailCoefficients c;
  const double kappa = g.kappa();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double s = grid.nodes[j];
    const double w = grid.line_weights[j] * f[j];
    if (g.dim() == 1) {
      c.right += std::exp(kappa * s) / kappa * w;
      c.left += std::exp(-kappa * s) / kappa * w;
    } else {
      // s' (e^{kappa s'} - e^{-kappa s'}) / kappa, with the kappa -> 0 limit 2 s'^2
      const double factor = kappa == 0.0 ? 2.0 * s * s : 2.0 * s * std::sinh(kappa * s) / kappa;
      c.right += factor * w;
    }
  }
  return c;
}

} // namespace bbm
