#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bbm/potential.hpp"
#include "bbm/quadrature.hpp"

namespace bbm {

/// Exact unsigned integer wide enough for S(30, k).
using BigCount = unsigned __int128;

std::string to_string(BigCount x);

/// Stirling number of the second kind, 1 <= k <= n <= 30.
BigCount stirling2(int n, int k);

enum class Regime { Supercritical, Subcritical };

/// f_1 .. f_N of the limit-variable moment recursion.
///
/// Supercritical: f_1 = psi (L2-normalized ground state) and
///   f_n = beta sum_{k=1}^{n-1} C(n,k) S_{n lambda0}(v f_k f_{n-k}),
/// Subcritical (dim=3): f_1 = 1 + S_0(beta v) and
///   f_n = beta sum_{k=1}^{n-1} C(n,k) S_0(v f_k f_{n-k}),
/// with S_lambda = (lambda - Delta/2 - beta v)^(-1).
struct MomentTable {
  Regime regime = Regime::Supercritical;
  double beta = 0.0;
  double lambda0 = 0.0;
  int order = 0;
  std::vector<double> points;
  /// f[n-1][j] = f_n(points[j]).
  std::vector<std::vector<double>> f;
  /// f_n at the grid nodes.
  std::vector<std::vector<double>> f_grid;
  /// int psi dV (supercritical only).
  double mass = 0.0;
  QuadGrid grid;
  /// Relative residuals of the dense solves, one per order n >= 2.
  std::vector<double> solve_residuals;

  std::size_t index_of(double x) const;
  /// sup over grid nodes and query points of f_n.
  double sup_norm(int n) const;
};

struct MomentOptions {
  /// Sum only k <= n/2 and double the off-centre terms.
  bool symmetric_halving = false;
};

MomentTable supercritical_f(double beta, int order, const std::vector<double>& points,
                            const Potential& p, const QuadGrid& grid, MomentOptions opts = {});

MomentTable subcritical_f(double beta, int order, const std::vector<double>& points,
                          const Potential& p, const QuadGrid& grid, MomentOptions opts = {});

/// E xi^n = (int psi)^n f_n(x), n = 1 .. order.
std::vector<double> xi_moments(const MomentTable& table, double x, int order);

/// Partial sums of f_n(x)^(-1/(2n)); unbounded growth is Carleman's criterion.
std::vector<double> carleman_partial_sums(const MomentTable& table, double x);

/// m_n(x) = sum_k S(n,k) f_k(x), n = 1 .. order.
std::vector<double> limit_moments_sub(const MomentTable& table, double x, int order);

/// Raw moments E n_t^j, j = 1 .. n, from the integrated correlation functions
/// rho_bar_1 .. rho_bar_n (factorial moments).
std::vector<double> raw_count_moments(const std::vector<double>& rho_bars, int n);

/// Envelope constant A for ||f_n|| <= A^(2n-1) n!, fitted on n <= fit_order:
/// the envelope must hold on the fitted orders and its growth factor A^2 per
/// order (after dividing by n!) must cover the fitted growth.
double factorial_envelope(const MomentTable& table, int fit_order = 3);

} // namespace bbm
