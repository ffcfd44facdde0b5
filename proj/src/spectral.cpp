#include "bbm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bbm/errors.hpp"

namespace bbm {

namespace {

// Value of G f beyond the grid range, from the tail coefficients of f.
double exterior_value(const GreenKernel& g, const TailCoefficients& tail, double s, bool right) {
  const double kappa = g.kappa();
  if (g.dim() == 3) return tail.right * (kappa == 0.0 ? 1.0 / s : std::exp(-kappa * s) / s);
  return right ? tail.right * std::exp(-kappa * s) : tail.left * std::exp(kappa * s);
}

// (G density)(s) for a density living on `grid`.
double evaluate_density(const GreenKernel& g, const QuadGrid& grid, const std::vector<double>& d,
                        const TailCoefficients& tail, double s) {
  if (g.dim() == 3) s = std::abs(s);
  if (s > grid.hi) return exterior_value(g, tail, s, true);
  if (s < grid.lo) return exterior_value(g, tail, s, false);
  std::vector<double> row(grid.size());
  green_row(g, grid, s, row);
  double acc = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * d[j];
  return acc;
}

} // namespace

DiscretizedOperator assemble_K(double lambda, double beta, const Potential& p, const QuadGrid& grid,
                               bool with_diagnostic) {
  if (!(lambda >= 0.0)) throw DomainError("assemble_K: lambda must be nonnegative");
  if (grid.dim == 1 && lambda == 0.0) throw DomainError("assemble_K: dim=1 requires lambda > 0");
  if (!(beta >= 0.0)) throw DomainError("assemble_K: beta must be nonnegative");
  const GreenKernel kernel(grid.dim, lambda);
  const auto n = static_cast<Eigen::Index>(grid.size());

  DiscretizedOperator op;
  op.lambda = lambda;
  op.beta = beta;
  op.green.resize(n, n);
  op.v.resize(grid.size());
  std::vector<double> row(grid.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    green_row(kernel, grid, grid.nodes[i], row);
    for (Eigen::Index j = 0; j < n; ++j) op.green(i, j) = row[j];
    op.v[i] = p.eval_scalar(grid.nodes[i]);
  }
  op.matrix = op.green;
  for (Eigen::Index i = 0; i < n; ++i) op.matrix.row(i) *= beta * op.v[i];

  if (with_diagnostic && beta > 0.0) {
    const double coarse = principal_eigen(op).mu;
    const QuadGrid fine = build_grid(p, static_cast<int>(2 * grid.size()));
    const double refined = principal_eigen(assemble_K(lambda, beta, p, fine)).mu;
    op.refinement_change = std::abs(refined - coarse) / refined;
  }
  return op;
}

PrincipalEigen principal_eigen(const Eigen::MatrixXd& k) {
  constexpr int kMaxIterations = 100000;
  constexpr double kTolerance = 1e-13;
  PrincipalEigen out;
  Eigen::VectorXd h = Eigen::VectorXd::Ones(k.rows());
  double previous_delta = 0.0;
  for (int it = 1; it <= kMaxIterations; ++it) {
    Eigen::VectorXd y = k * h;
    const double mu = y.maxCoeff();
    if (!(mu > 0.0) || !std::isfinite(mu))
      throw NumericalError("principal_eigen: operator annihilates the iterate");
    y /= mu;
    const double delta = (y - h).cwiseAbs().maxCoeff();
    if (previous_delta > 0.0 && delta > 0.0) out.gap_ratio = delta / previous_delta;
    previous_delta = delta;
    h = std::move(y);
    out.iterations = it;
    if (delta <= kTolerance) break;
    if (it == kMaxIterations) {
      throw NumericalError("principal_eigen: no convergence in 1e5 iterations (spectral gap ratio " +
                           std::to_string(out.gap_ratio) + ")");
    }
  }
  const Eigen::VectorXd kh = k * h;
  Eigen::Index imax = 0;
  h.maxCoeff(&imax);
  out.mu = kh(imax) / h(imax);
  out.residual = (kh - out.mu * h).cwiseAbs().maxCoeff();
  out.h = std::move(h);
  return out;
}

PrincipalEigen principal_eigen(const DiscretizedOperator& k) { return principal_eigen(k.matrix); }

double principal_mu(double lambda, const Potential& p, const QuadGrid& grid) {
  return principal_eigen(assemble_K(lambda, 1.0, p, grid)).mu;
}

double beta_critical(const Potential& p, const QuadGrid& grid) {
  if (grid.dim == 1) return 0.0;
  return 1.0 / principal_mu(0.0, p, grid);
}

double beta_for_lambda0(double lambda, const Potential& p, const QuadGrid& grid) {
  if (!(lambda > 0.0)) throw DomainError("beta_for_lambda0: lambda must be positive");
  return 1.0 / principal_mu(lambda, p, grid);
}

double lambda0(double beta, const Potential& p, const QuadGrid& grid) {
  if (!(beta > 0.0)) throw DomainError("lambda0: beta must be positive");
  auto f = [&](double lambda) { return std::log(beta * principal_mu(lambda, p, grid)); };

  double a = 0.0;
  double fa = 0.0;
  if (grid.dim == 3) {
    fa = f(0.0);
    if (!(fa > 0.0))
      throw DomainError("lambda0: beta <= beta_cr (subcritical/critical: lambda0 undefined/zero)");
  } else {
    a = 1e-3 * beta * p.v_max();
    fa = f(a);
    for (int i = 0; i < 40 && fa <= 0.0; ++i) {
      a *= 0.1;
      fa = f(a);
    }
    if (fa <= 0.0) throw NumericalError("lambda0: could not bracket the root from below");
  }
  // The top of the spectrum of Delta/2 + beta v is below beta sup v.
  double b = beta * p.v_max();
  double fb = f(b);
  for (int i = 0; i < 20 && fb >= 0.0; ++i) {
    b *= 2.0;
    fb = f(b);
  }
  if (fb >= 0.0) throw NumericalError("lambda0: could not bracket the root from above");

  // Illinois regula falsi with a bisection fallback.
  int side = 0;
  double width = b - a;
  for (int it = 0; it < 300; ++it) {
    double c = (a * fb - b * fa) / (fb - fa);
    if (!(c > a && c < b)) c = 0.5 * (a + b);
    const double fc = f(c);
    if (fc == 0.0) return c;
    if ((fc > 0.0) == (fa > 0.0)) {
      a = c;
      fa = fc;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = c;
      fb = fc;
      if (side == +1) fa *= 0.5;
      side = +1;
    }
    if (b - a <= 1e-11 * b) return 0.5 * (a + b);
    if (b - a > 0.5 * width) {
      // slow progress: bisect once
      const double m = 0.5 * (a + b);
      const double fm = f(m);
      if ((fm > 0.0) == (fa > 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
        fb = fm;
      }
      side = 0;
    }
    width = b - a;
  }
  throw NumericalError("lambda0: root finding did not converge");
}

ProfileTable::ProfileTable(int dim, double lo, double hi, std::vector<double> values,
                           GreenKernel kernel, TailCoefficients tail)
    : dim_(dim), lo_(lo), hi_(hi), values_(std::move(values)), kernel_(kernel), tail_(tail) {
  step_ = (hi_ - lo_) / static_cast<double>(values_.size() - 1);
}

double ProfileTable::operator()(double s) const {
  if (dim_ == 3) s = std::abs(s);
  if (s >= hi_) return exterior_value(kernel_, tail_, s, true);
  if (s <= lo_) return dim_ == 1 ? exterior_value(kernel_, tail_, s, false) : values_.front();
  const double pos = (s - lo_) / step_;
  const auto i = std::min(static_cast<std::size_t>(pos), values_.size() - 2);
  const double t = pos - static_cast<double>(i);
  return (1.0 - t) * values_[i] + t * values_[i + 1];
}

double ProfileTable::operator()(const Point& x) const {
  return dim_ == 1 ? (*this)(x[0]) : (*this)(norm(x, 3));
}

double GroundState::operator()(double s) const {
  return evaluate_density(kernel_, grid_, source_, tail_, s);
}

double GroundState::operator()(const Point& x) const {
  return dim() == 1 ? (*this)(x[0]) : (*this)(norm(x, 3));
}

double GroundState::fixed_point_residual() const {
  const double sup = *std::max_element(psi_.begin(), psi_.end());
  std::vector<double> bvpsi(psi_.size());
  for (std::size_t i = 0; i < psi_.size(); ++i) bvpsi[i] = beta_ * v_[i] * psi_[i];
  const auto image = green_apply(kernel_, grid_, bvpsi, grid_.nodes);
  double worst = 0.0;
  for (std::size_t i = 0; i < psi_.size(); ++i) worst = std::max(worst, std::abs(psi_[i] - image[i]));
  return worst / sup;
}

ProfileTable GroundState::table(int points) const {
  const double lo = grid_.lo;
  const double hi = grid_.hi;
  std::vector<double> values(points);
  std::vector<double> targets(points);
  for (int i = 0; i < points; ++i)
    targets[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  values = green_apply(kernel_, grid_, source_, targets);
  return ProfileTable(dim(), lo, hi, std::move(values), kernel_, tail_);
}

GroundState ground_state(double beta, const Potential& p, const QuadGrid& grid,
                         Normalization normalization) {
  double lam = 0.0;
  if (normalization == Normalization::L2) {
    lam = lambda0(beta, p, grid);
  } else {
    if (grid.dim != 3) throw DomainError("ground_state: critical ground state needs dim=3");
    const double mismatch = std::abs(beta * principal_mu(0.0, p, grid) - 1.0);
    if (mismatch > 1e-8)
      throw DomainError("ground_state: critical normalization requires beta = beta_cr");
  }
  const DiscretizedOperator op = assemble_K(lam, beta, p, grid);
  const PrincipalEigen eig = principal_eigen(op);

  GroundState gs(beta, lam, normalization, grid, GreenKernel(grid.dim, lam));
  const std::size_t n = grid.size();
  gs.v_ = op.v;
  gs.source_.assign(eig.h.data(), eig.h.data() + n);
  Eigen::VectorXd psi = op.green * eig.h;
  gs.psi_.assign(psi.data(), psi.data() + n);
  gs.tail_ = exterior_coefficients(gs.kernel_, grid, gs.source_);

  double scale = 1.0;
  if (normalization == Normalization::L2) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += grid.weights[i] * gs.psi_[i] * gs.psi_[i];
    const double two_kappa = 2.0 * gs.kernel_.kappa();
    if (grid.dim == 3) {
      sq += 4.0 * std::numbers::pi * gs.tail_.right * gs.tail_.right *
            std::exp(-two_kappa * grid.hi) / two_kappa;
    } else {
      sq += gs.tail_.right * gs.tail_.right * std::exp(-two_kappa * grid.hi) / two_kappa;
      sq += gs.tail_.left * gs.tail_.left * std::exp(two_kappa * grid.lo) / two_kappa;
    }
    scale = 1.0 / std::sqrt(sq);
  } else {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double b = beta * op.v[i] * gs.psi_[i];
      sq += grid.weights[i] * b * b;
    }
    scale = 1.0 / std::sqrt(sq);
  }
  for (double& x : gs.psi_) x *= scale;
  for (double& x : gs.source_) x *= scale;
  gs.tail_.left *= scale;
  gs.tail_.right *= scale;

  if (normalization == Normalization::L2) {
    // int G_lambda f = (1 / lambda) int f
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += grid.weights[i] * gs.source_[i];
    gs.mass_ = total / lam;
  } else {
    gs.mass_ = std::numeric_limits<double>::infinity();
  }
  return gs;
}

void ResolventImage::add(const QuadGrid& grid, std::vector<double> density) {
  parts_.emplace_back(grid, std::move(density));
  tails_.push_back(exterior_coefficients(kernel_, parts_.back().first, parts_.back().second));
}

double ResolventImage::operator()(double s) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < parts_.size(); ++k)
    acc += evaluate_density(kernel_, parts_[k].first, parts_[k].second, tails_[k], s);
  return acc;
}

std::vector<double> ResolventImage::operator()(const std::vector<double>& s) const {
  std::vector<double> out(s.size(), 0.0);
  for (std::size_t k = 0; k < parts_.size(); ++k) {
    const auto& [grid, density] = parts_[k];
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double x = grid.dim == 3 ? std::abs(s[i]) : s[i];
      if (x >= grid.lo && x <= grid.hi) continue;
      out[i] += evaluate_density(kernel_, grid, density, tails_[k], s[i]);
    }
    // interior targets in one batch
    std::vector<double> inside;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double x = grid.dim == 3 ? std::abs(s[i]) : s[i];
      if (x >= grid.lo && x <= grid.hi) {
        inside.push_back(x);
        index.push_back(i);
      }
    }
    const auto values = green_apply(kernel_, grid, density, inside);
    for (std::size_t m = 0; m < index.size(); ++m) out[index[m]] += values[m];
  }
  return out;
}

Resolvent::Resolvent(double lambda, double beta, const Potential& p, const QuadGrid& grid)
    : potential_(p), grid_(grid), kernel_(grid.dim, lambda), op_(assemble_K(lambda, beta, p, grid)) {
  if (beta > 0.0) {
    const double mu = principal_eigen(op_).mu;
    if (mu >= 1.0 - 1e-10) {
      throw DomainError("resolvent: lambda = " + std::to_string(lambda) +
                        " is not above the spectrum (principal eigenvalue of K is " +
                        std::to_string(mu) + ")");
    }
  }
  const auto n = static_cast<Eigen::Index>(grid.size());
  lu_.compute(Eigen::MatrixXd::Identity(n, n) - op_.matrix);
}

ResolventImage Resolvent::finish(const Eigen::VectorXd& green_g) const {
  const auto n = static_cast<Eigen::Index>(grid_.size());
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) rhs(i) = op_.beta * op_.v[i] * green_g(i);
  const Eigen::VectorXd phi = lu_.solve(rhs);
  const Eigen::VectorXd r = phi - op_.matrix * phi - rhs;
  const double scale = std::max(rhs.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  ResolventImage image(kernel_);
  image.solve_residual = r.cwiseAbs().maxCoeff() / scale;
  if (!phi.allFinite()) throw NumericalError("resolvent: singular system");
  image.add(grid_, std::vector<double>(phi.data(), phi.data() + n));
  return image;
}

ResolventImage Resolvent::apply(const std::vector<double>& g) const {
  if (g.size() != grid_.size()) throw ValidationError("resolvent: g must have one value per node");
  const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));
  ResolventImage image = finish(op_.green * gv);
  image.add(grid_, g);
  return image;
}

ResolventImage Resolvent::apply(const std::function<double(double)>& g, double extent) const {
  std::vector<double> bp = potential_.breakpoints();
  if (grid_.dim == 3) {
    bp.push_back(0.0);
  } else {
    bp.push_back(-extent);
  }
  bp.push_back(extent);
  std::erase_if(bp, [&](double x) { return std::abs(x) > extent; });
  const double range = grid_.dim == 3 ? extent : 2.0 * extent;
  const int nodes = 16 * std::max(2, static_cast<int>(std::ceil(range / 0.25)));
  const QuadGrid outer = build_grid(grid_.dim, bp, nodes);

  std::vector<double> g_outer(outer.size());
  for (std::size_t j = 0; j < outer.size(); ++j) g_outer[j] = g(outer.nodes[j]);
  const auto green_g = green_apply(kernel_, outer, g_outer, grid_.nodes);
  ResolventImage image =
      finish(Eigen::Map<const Eigen::VectorXd>(green_g.data(), static_cast<Eigen::Index>(green_g.size())));
  image.add(outer, std::move(g_outer));
  return image;
}

std::vector<double> resolvent_apply(double lambda, double beta, const Potential& p,
                                    const QuadGrid& grid, const std::vector<double>& g,
                                    const std::vector<double>& targets) {
  return Resolvent(lambda, beta, p, grid).apply(g)(targets);
}

} // namespace bbm
