#pragma once

#include <cstddef>
#include <vector>

#include "bbm/potential.hpp"

namespace bbm {

/// Gauss-Legendre rule with n points on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussRule gauss_legendre(int n);

/// Panel [a, b] holding grid nodes first .. first + order - 1.
struct Panel {
  double a = 0.0;
  double b = 0.0;
  std::size_t first = 0;
};

/// Composite Gauss-Legendre grid over the support of a branching field, in
/// the scalar coordinate (position for dim=1, radius for dim=3).
///
/// `weights` integrate over space: sum_i weights[i] f(x_i) ~ int f dV, so for
/// dim=3 they carry the 4 pi r^2 factor. `line_weights` are the plain 1D Gauss
/// weights in the scalar coordinate.
struct QuadGrid {
  int dim = 3;
  int order = 16;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> line_weights;
  std::vector<Panel> panels;
  /// Barycentric weights of the reference Gauss nodes, shared by all panels.
  std::vector<double> bary;

  std::size_t size() const { return nodes.size(); }
};

/// Grid covering supp v with (about) n_nodes nodes, panels aligned to the
/// breakpoints of v. Requires n_nodes >= 16; throws ValidationError otherwise.
QuadGrid build_grid(const Potential& p, int n_nodes);

/// Grid on [lo, hi] with the given panel breakpoints (must include lo, hi).
QuadGrid build_grid(int dim, std::vector<double> breakpoints, int n_nodes);

/// Values of the Lagrange basis of panel `panel` at s (order entries).
void lagrange_basis(const QuadGrid& grid, const Panel& panel, double s, double* out);

/// Interpolates grid values f at scalar coordinate s inside [lo, hi].
double interpolate(const QuadGrid& grid, const std::vector<double>& f, double s);

} // namespace bbm
