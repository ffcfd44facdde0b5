#include "bbm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bbm/errors.hpp"

namespace bbm {

GaussRule gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

QuadGrid build_grid(int dim, std::vector<double> bp, int n_nodes) {
  if (n_nodes < 16) throw ValidationError("build_grid: n_nodes must be at least 16");
  if (dim != 1 && dim != 3) throw ValidationError("build_grid: dim must be 1 or 3");
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  if (bp.size() < 2) throw ValidationError("build_grid: need a nonempty interval");

  QuadGrid g;
  g.dim = dim;
  g.order = 16;
  g.lo = bp.front();
  g.hi = bp.back();
  const std::size_t segments = bp.size() - 1;
  const std::size_t wanted = std::max<std::size_t>((n_nodes + g.order - 1) / g.order, segments);

  // Each segment gets at least one panel; the rest go by length.
  std::vector<std::size_t> count(segments, 1);
  for (std::size_t extra = wanted - segments; extra > 0; --extra) {
    std::size_t best = 0;
    double best_len = -1.0;
    for (std::size_t s = 0; s < segments; ++s) {
      const double len = (bp[s + 1] - bp[s]) / static_cast<double>(count[s]);
      if (len > best_len) {
        best_len = len;
        best = s;
      }
    }
    count[best] += 1;
  }

  const GaussRule ref = gauss_legendre(g.order);
  g.bary.resize(g.order);
  for (int j = 0; j < g.order; ++j) {
    double prod = 1.0;
    for (int k = 0; k < g.order; ++k)
      if (k != j) prod *= ref.nodes[j] - ref.nodes[k];
    g.bary[j] = 1.0 / prod;
  }

  for (std::size_t s = 0; s < segments; ++s) {
    const double h = (bp[s + 1] - bp[s]) / static_cast<double>(count[s]);
    for (std::size_t c = 0; c < count[s]; ++c) {
      Panel panel;
      panel.a = bp[s] + h * static_cast<double>(c);
      panel.b = c + 1 == count[s] ? bp[s + 1] : panel.a + h;
      panel.first = g.nodes.size();
      const double half = 0.5 * (panel.b - panel.a);
      const double mid = 0.5 * (panel.b + panel.a);
      for (int j = 0; j < g.order; ++j) {
        const double x = mid + half * ref.nodes[j];
        const double w = half * ref.weights[j];
        g.nodes.push_back(x);
        g.line_weights.push_back(w);
        g.weights.push_back(dim == 3 ? 4.0 * std::numbers::pi * x * x * w : w);
      }
      g.panels.push_back(panel);
    }
  }
  return g;
}

QuadGrid build_grid(const Potential& p, int n_nodes) {
  return build_grid(p.dim(), p.breakpoints(), n_nodes);
}

void lagrange_basis(const QuadGrid& grid, const Panel& panel, double s, double* out) {
  const int q = grid.order;
  const double half = 0.5 * (panel.b - panel.a);
  const double mid = 0.5 * (panel.b + panel.a);
  const double t = (s - mid) / half;
  // map panel nodes back to the reference interval
  double denom = 0.0;
  for (int j = 0; j < q; ++j) {
    const double tj = (grid.nodes[panel.first + j] - mid) / half;
    const double diff = t - tj;
    if (diff == 0.0) {
      std::fill(out, out + q, 0.0);
      out[j] = 1.0;
      return;
    }
    out[j] = grid.bary[j] / diff;
    denom += out[j];
  }
  for (int j = 0; j < q; ++j) out[j] /= denom;
}

double interpolate(const QuadGrid& grid, const std::vector<double>& f, double s) {
  const auto it = std::upper_bound(grid.panels.begin(), grid.panels.end(), s,
                                   [](double x, const Panel& p) { return x < p.b; });
  const Panel& panel = it == grid.panels.end() ? grid.panels.back() : *it;
  std::vector<double> basis(grid.order);
  lagrange_basis(grid, panel, s, basis.data());
  double acc = 0.0;
  for (int j = 0; j < grid.order; ++j) acc += basis[j] * f[panel.first + j];
  return acc;
}

} // namespace bbm
