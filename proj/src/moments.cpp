#include "bbm/moments.hpp"

#include <algorithm>
#include <cmath>

#include "bbm/errors.hpp"
#include "bbm/spectral.hpp"

namespace bbm {

namespace {

constexpr int kMaxOrder = 12;

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// beta sum_k C(n,k) v f_k f_{n-k} at the grid nodes.
std::vector<double> recursion_source(const MomentTable& t, const std::vector<double>& v, int n,
                                     bool halving) {
  std::vector<double> g(v.size(), 0.0);
  for (int k = 1; k < n; ++k) {
    double weight = binomial(n, k);
    if (halving) {
      if (2 * k > n) break;
      if (2 * k < n) weight *= 2.0;
    }
    const auto& a = t.f_grid[k - 1];
    const auto& b = t.f_grid[n - k - 1];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weight * a[i] * b[i];
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= t.beta * v[i];
  return g;
}

void push_order(MomentTable& t, const ResolventImage& image) {
  auto on_grid = image(t.grid.nodes);
  auto at_points = image(t.points);
  const auto finite = [](const std::vector<double>& xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(on_grid) || !finite(at_points))
    throw NumericalError("moments: f_" + std::to_string(t.f.size() + 1) + " overflowed");
  t.f_grid.push_back(std::move(on_grid));
  t.f.push_back(std::move(at_points));
  t.solve_residuals.push_back(image.solve_residual);
}

std::vector<double> nodal_v(const Potential& p, const QuadGrid& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = p.eval_scalar(grid.nodes[i]);
  return v;
}

void check_order(int order) {
  if (order < 1 || order > kMaxOrder)
    throw DomainError("moments: order must be in [1, 12] (f_n grows like n!)");
}

} // namespace

std::string to_string(BigCount x) {
  if (x == 0) return "0";
  std::string s;
  while (x > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(x % 10)));
    x /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

BigCount stirling2(int n, int k) {
  if (n < 1 || n > 30 || k < 1 || k > n) throw DomainError("stirling2: need 1 <= k <= n <= 30");
  // row-by-row triangle S(m, j) = j S(m-1, j) + S(m-1, j-1)
  std::vector<BigCount> row(n + 1, 0);
  row[0] = 1;
  for (int m = 1; m <= n; ++m) {
    for (int j = m; j >= 1; --j) row[j] = static_cast<BigCount>(j) * row[j] + row[j - 1];
    row[0] = 0;
  }
  return row[k];
}

std::size_t MomentTable::index_of(double x) const {
  for (std::size_t j = 0; j < points.size(); ++j)
    if (std::abs(points[j] - x) <= 1e-12 * std::max(1.0, std::abs(x))) return j;
  throw ValidationError("moments: x is not among the table's query points");
}

double MomentTable::sup_norm(int n) const {
  const auto& g = f_grid.at(n - 1);
  const auto& q = f.at(n - 1);
  double m = 0.0;
  for (double x : g) m = std::max(m, std::abs(x));
  for (double x : q) m = std::max(m, std::abs(x));
  return m;
}

MomentTable supercritical_f(double beta, int order, const std::vector<double>& points,
                            const Potential& p, const QuadGrid& grid, MomentOptions opts) {
  check_order(order);
  const GroundState gs = ground_state(beta, p, grid, Normalization::L2);

  MomentTable t;
  t.regime = Regime::Supercritical;
  t.beta = beta;
  t.lambda0 = gs.lambda0();
  t.order = order;
  t.points = points;
  t.grid = grid;
  t.mass = gs.mass();
  t.f_grid.push_back(gs.values());
  std::vector<double> f1(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) f1[j] = gs(points[j]);
  t.f.push_back(std::move(f1));

  const auto v = nodal_v(p, grid);
  for (int n = 2; n <= order; ++n) {
    const Resolvent s(n * t.lambda0, beta, p, grid);
    push_order(t, s.apply(recursion_source(t, v, n, opts.symmetric_halving)));
  }
  return t;
}

MomentTable subcritical_f(double beta, int order, const std::vector<double>& points,
                          const Potential& p, const QuadGrid& grid, MomentOptions opts) {
  check_order(order);
  if (grid.dim != 3) throw DomainError("subcritical_f: the subcritical regime needs dim=3");
  if (!(beta > 0.0)) throw DomainError("subcritical_f: beta must be positive");
  if (beta >= beta_critical(p, grid)) throw DomainError("subcritical_f: beta must be below beta_cr");

  MomentTable t;
  t.regime = Regime::Subcritical;
  t.beta = beta;
  t.order = order;
  t.points = points;
  t.grid = grid;

  const auto v = nodal_v(p, grid);
  const Resolvent s(0.0, beta, p, grid);
  std::vector<double> bv(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) bv[i] = beta * v[i];
  push_order(t, s.apply(bv));
  for (double& x : t.f_grid[0]) x += 1.0;
  for (double& x : t.f[0]) x += 1.0;

  for (int n = 2; n <= order; ++n) push_order(t, s.apply(recursion_source(t, v, n, opts.symmetric_halving)));
  return t;
}

std::vector<double> xi_moments(const MomentTable& table, double x, int order) {
  if (table.regime != Regime::Supercritical)
    throw ValidationError("xi_moments: needs a supercritical table");
  if (order > table.order) throw ValidationError("xi_moments: order exceeds the table");
  const std::size_t j = table.index_of(x);
  std::vector<double> m(order);
  for (int n = 1; n <= order; ++n) m[n - 1] = std::pow(table.mass, n) * table.f[n - 1][j];
  return m;
}

std::vector<double> carleman_partial_sums(const MomentTable& table, double x) {
  const std::size_t j = table.index_of(x);
  std::vector<double> sums;
  double acc = 0.0;
  for (int n = 1; n <= table.order; ++n) {
    acc += std::pow(1.0 / table.f[n - 1][j], 1.0 / (2.0 * n));
    sums.push_back(acc);
  }
  return sums;
}

std::vector<double> limit_moments_sub(const MomentTable& table, double x, int order) {
  if (table.regime != Regime::Subcritical)
    throw ValidationError("limit_moments_sub: needs a subcritical table");
  if (order > table.order) throw ValidationError("limit_moments_sub: order exceeds the table");
  const std::size_t j = table.index_of(x);
  std::vector<double> f(order);
  for (int k = 1; k <= order; ++k) f[k - 1] = table.f[k - 1][j];
  return raw_count_moments(f, order);
}

std::vector<double> raw_count_moments(const std::vector<double>& rho_bars, int n) {
  if (n < 1 || static_cast<std::size_t>(n) > rho_bars.size())
    throw ValidationError("raw_count_moments: need rho_bar_1 .. rho_bar_n");
  std::vector<double> m(n, 0.0);
  for (int j = 1; j <= n; ++j)
    for (int k = 1; k <= j; ++k) m[j - 1] += static_cast<double>(stirling2(j, k)) * rho_bars[k - 1];
  return m;
}

double factorial_envelope(const MomentTable& table, int fit_order) {
  const int top = std::min(fit_order, table.order);
  double a = 0.0;
  for (int n = 1; n <= top; ++n) {
    a = std::max(a, std::pow(table.sup_norm(n) / factorial(n), 1.0 / (2.0 * n - 1.0)));
    // successive ratios of ||f_n|| / n! must not exceed A^2
    if (n > 1) a = std::max(a, std::sqrt(table.sup_norm(n) / (n * table.sup_norm(n - 1))));
  }
  return a;
}

} // namespace bbm
