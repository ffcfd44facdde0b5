#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bbm/green.hpp"
#include "bbm/potential.hpp"
#include "bbm/quadrature.hpp"

namespace bbm {

/// Nystrom matrix of K_lambda = beta v G_lambda on a grid:
/// matrix(i, j) = beta v(x_i) green(i, j), where green is the product-quadrature
/// discretization of G_lambda (green(i, j) ~ G(x_i, x_j) w_j away from the
/// diagonal panel).
struct DiscretizedOperator {
  double lambda = 0.0;
  double beta = 0.0;
  Eigen::MatrixXd green;
  Eigen::MatrixXd matrix;
  std::vector<double> v;
  /// Relative change of the principal eigenvalue when the node count is
  /// doubled; filled only by assemble_K(..., with_diagnostic = true).
  std::optional<double> refinement_change;
};

DiscretizedOperator assemble_K(double lambda, double beta, const Potential& p, const QuadGrid& grid,
                               bool with_diagnostic = false);

struct PrincipalEigen {
  double mu = 0.0;
  Eigen::VectorXd h; // sup-normalized, nonnegative
  int iterations = 0;
  double residual = 0.0;
  /// Estimated |mu_2| / mu from the contraction of successive iterates.
  double gap_ratio = 0.0;
};

/// Power iteration for a nonnegative matrix. Throws NumericalError when the
/// iterate has not settled to 1e-12 within 1e5 steps.
PrincipalEigen principal_eigen(const Eigen::MatrixXd& k);
PrincipalEigen principal_eigen(const DiscretizedOperator& k);

/// Principal eigenvalue of v G_lambda (beta = 1); strictly decreasing in lambda.
double principal_mu(double lambda, const Potential& p, const QuadGrid& grid);

/// 1 / mu(0) in dim=3; 0 in dim=1, where every beta > 0 is supercritical.
double beta_critical(const Potential& p, const QuadGrid& grid);

/// The growth exponent: unique lambda > 0 with beta mu(lambda) = 1.
double lambda0(double beta, const Potential& p, const QuadGrid& grid);

/// Inverse of lambda0: the beta whose growth exponent is `lambda` (> 0).
double beta_for_lambda0(double lambda, const Potential& p, const QuadGrid& grid);

enum class Normalization { L2, Critical };

/// Values of psi outside the support are c * exp(-kappa r) / r (dim=3) or
/// c * exp(-kappa |x|) (dim=1); this table evaluates psi cheaply anywhere.
class ProfileTable {
public:
  ProfileTable() = default;
  ProfileTable(int dim, double lo, double hi, std::vector<double> values, GreenKernel kernel,
               TailCoefficients tail);

  double operator()(double s) const;
  double operator()(const Point& x) const;

private:
  int dim_ = 3;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double step_ = 1.0;
  std::vector<double> values_;
  GreenKernel kernel_{3, 0.0};
  TailCoefficients tail_;
};

/// Positive ground state psi of Delta/2 + beta v at the top of the spectrum,
/// psi = G_{lambda0}(beta v psi). L2 normalization sets ||psi||_2 = 1
/// (supercritical); Critical sets ||beta v psi||_2 = 1 (dim=3, beta = beta_cr).
class GroundState {
public:
  double beta() const { return beta_; }
  double lambda0() const { return lambda0_; }
  int dim() const { return grid_.dim; }
  Normalization normalization() const { return normalization_; }
  const QuadGrid& grid() const { return grid_; }
  const GreenKernel& kernel() const { return kernel_; }

  /// psi at the grid nodes.
  const std::vector<double>& values() const { return psi_; }
  /// beta v psi at the grid nodes.
  const std::vector<double>& source() const { return source_; }

  /// int psi dV; +infinity for the critical ground state in dim=3.
  double mass() const { return mass_; }

  /// psi anywhere, in the scalar coordinate (position or radius).
  double operator()(double s) const;
  double operator()(const Point& x) const;

  /// sup over nodes of |psi - G(beta v psi)| / sup psi.
  double fixed_point_residual() const;

  ProfileTable table(int points = 4096) const;

private:
  friend GroundState ground_state(double, const Potential&, const QuadGrid&, Normalization);

  GroundState(double beta, double lambda0, Normalization n, QuadGrid grid, GreenKernel kernel)
      : beta_(beta), lambda0_(lambda0), normalization_(n), grid_(std::move(grid)),
        kernel_(kernel) {}

  double beta_;
  double lambda0_;
  Normalization normalization_;
  QuadGrid grid_;
  GreenKernel kernel_;
  std::vector<double> v_;
  std::vector<double> psi_;
  std::vector<double> source_;
  TailCoefficients tail_;
  double mass_ = 0.0;
};

GroundState ground_state(double beta, const Potential& p, const QuadGrid& grid,
                         Normalization normalization);

/// u = S_lambda g, represented as G_lambda applied to compactly supported
/// densities on one or more grids.
class ResolventImage {
public:
  ResolventImage(GreenKernel kernel) : kernel_(kernel) {}

  void add(const QuadGrid& grid, std::vector<double> density);

  double operator()(double s) const;
  std::vector<double> operator()(const std::vector<double>& s) const;

  /// Residual of the dense solve for the grid correction.
  double solve_residual = 0.0;

private:
  GreenKernel kernel_;
  std::vector<std::pair<QuadGrid, std::vector<double>>> parts_;
  std::vector<TailCoefficients> tails_;
};

/// S_lambda = (lambda - Delta/2 - beta v)^(-1) for lambda above the spectrum,
/// applied through u = G g + G phi with (I - K_lambda) phi = beta v G g.
class Resolvent {
public:
  /// Throws DomainError when lambda is at or below the top of the spectrum.
  Resolvent(double lambda, double beta, const Potential& p, const QuadGrid& grid);

  double lambda() const { return op_.lambda; }
  double beta() const { return op_.beta; }

  /// g given by its values at the grid nodes (supported in the grid range).
  ResolventImage apply(const std::vector<double>& g) const;

  /// g given as a function of the scalar coordinate, negligible beyond |s| > extent.
  ResolventImage apply(const std::function<double(double)>& g, double extent) const;

  const QuadGrid& grid() const { return grid_; }
  const Potential& potential() const { return potential_; }

private:
  ResolventImage finish(const Eigen::VectorXd& green_g) const;

  Potential potential_;
  QuadGrid grid_;
  GreenKernel kernel_;
  DiscretizedOperator op_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// One-shot form of Resolvent::apply; values of S_lambda g at `targets`.
std::vector<double> resolvent_apply(double lambda, double beta, const Potential& p,
                                    const QuadGrid& grid, const std::vector<double>& g,
                                    const std::vector<double>& targets);

} // namespace bbm
