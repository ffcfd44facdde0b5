#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include "bbm/errors.hpp"
#include "bbm/quadrature.hpp"
#include "bbm/spectral.hpp"
#include "bbm/stats.hpp"
#include "bbm/verify.hpp"
#include "helpers.hpp"

using namespace bbm;
using testing::bump;

namespace {

double dense_principal(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  double best = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) best = std::max(best, es.eigenvalues()[i].real());
  return best;
}

const Potential& ref() {
  static const Potential p = bump(3);
  return p;
}
const QuadGrid& ref_grid() {
  static const QuadGrid g = build_grid(ref(), 128);
  return g;
}

constexpr double kBetaSuper = 5.4211401502; // lambda0 = 0.5 for the reference bump

} // namespace

TEST_CASE("assemble_K: zero for beta=0, nonnegative, rows vanish off the support") {
  const auto& grid = ref_grid();
  const auto k0 = assemble_K(0.3, 0.0, ref(), grid);
  CHECK(k0.matrix.cwiseAbs().maxCoeff() == 0.0);
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto k = assemble_K(u(gen), 0.1 + u(gen), ref(), grid);
    CHECK(k.matrix.minCoeff() >= 0.0);
  }
  const auto p1 = bump(1);
  const auto wide = build_grid(1, {-2.0, -1.0, 1.0, 2.0}, 96);
  const auto k1 = assemble_K(0.5, 1.0, p1, wide);
  for (std::size_t i = 0; i < wide.size(); ++i)
    if (std::abs(wide.nodes[i]) >= 1.0) CHECK(k1.matrix.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(assemble_K(-0.1, 1.0, ref(), grid), DomainError);
  CHECK_THROWS_AS(assemble_K(0.0, 1.0, p1, build_grid(p1, 64)), DomainError);
}

TEST_CASE("assemble_K: symmetrized similarity gives the same principal eigenvalue") {
  for (int dim : {1, 3}) {
    const auto p = bump(dim);
    const auto grid = build_grid(p, 64);
    const auto k = assemble_K(0.4, 2.0, p, grid);
    Eigen::VectorXd s(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) s(static_cast<Eigen::Index>(i)) = std::sqrt(2.0 * p.eval_scalar(grid.nodes[i]));
    const Eigen::MatrixXd sym = s.asDiagonal() * k.green * s.asDiagonal();
    CHECK(std::abs(principal_eigen(k).mu / dense_principal(sym) - 1.0) < 1e-8);
  }
}

TEST_CASE("assemble_K: doubling the nodes moves mu by at most 1e-6") {
  const auto k = assemble_K(0.0, 1.0, ref(), build_grid(ref(), 64), true);
  REQUIRE(k.refinement_change.has_value());
  CHECK(*k.refinement_change <= 1e-6);
}

TEST_CASE("principal_eigen: rank one, scaling, dense oracle") {
  Eigen::MatrixXd r1 = Eigen::MatrixXd::Zero(6, 6);
  r1(2, 2) = 3.5;
  CHECK(principal_eigen(r1).mu == doctest::Approx(3.5));
  Eigen::VectorXd a(5);
  Eigen::VectorXd b(5);
  a << 1, 2, 3, 4, 5;
  b << 0.5, 0.1, 0.2, 0.3, 0.4;
  const Eigen::MatrixXd outer = a * b.transpose();
  CHECK(principal_eigen(outer).mu == doctest::Approx(outer.trace()).epsilon(1e-12));

  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd m(32, 32);
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) m(i, j) = u(gen);
    const auto e = principal_eigen(m);
    CHECK(std::abs(e.mu / dense_principal(m) - 1.0) < 1e-9);
    CHECK(e.residual <= 1e-10 * e.mu);
    CHECK(e.h.maxCoeff() == doctest::Approx(1.0));
    CHECK(e.h.minCoeff() > 0.0);
    CHECK(principal_eigen(Eigen::MatrixXd(2.5 * m)).mu == doctest::Approx(2.5 * e.mu).epsilon(1e-12));
  }
  const auto k = principal_eigen(assemble_K(0.0, 1.0, ref(), ref_grid()));
  CHECK(k.h.minCoeff() >= 0.0);
  CHECK(k.h(0) > 0.0);
  CHECK_THROWS_AS(principal_eigen(Eigen::MatrixXd::Zero(4, 4)), NumericalError);
}

TEST_CASE("beta_critical: dim=1 is zero, dim=3 agrees with shooting") {
  CHECK(beta_critical(bump(1), build_grid(bump(1), 64)) == 0.0);
  CHECK(beta_critical(testing::indicator(1, 0.1), build_grid(testing::indicator(1, 0.1), 64)) == 0.0);
  const double bc = beta_critical(ref(), ref_grid());
  CHECK(bc == doctest::Approx(3.1639283741).epsilon(1e-9));
  CHECK(std::abs(bc / shooting_beta_critical(ref()) - 1.0) < 1e-8);
}

TEST_CASE("beta_critical: scaling v(./s) divides by s^2") {
  const auto q = ref().scaled(2.0);
  const double ratio = beta_critical(ref(), ref_grid()) / beta_critical(q, build_grid(q, 128));
  CHECK(std::abs(ratio - 4.0) < 0.04);
}

TEST_CASE("beta_critical: smoothed indicator approaches pi^2/8") {
  const double target = std::numbers::pi * std::numbers::pi / 8.0;
  double prev_err = 1.0;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const auto p = testing::indicator(3, eps);
    const double err = std::abs(beta_critical(p, build_grid(p, 128)) / target - 1.0);
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 0.02);
}

TEST_CASE("mu(lambda) strictly decreasing on a 10-point ladder") {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10; ++i) {
    const double mu = principal_mu(0.2 * i, ref(), ref_grid());
    CHECK(mu < prev);
    prev = mu;
  }
}

TEST_CASE("lambda0: dim=1 transcendental oracle, monotone ladder, limit at beta_cr") {
  const auto p = testing::indicator(1, 1e-4);
  const double exact = indicator_lambda0_1d(1.0, 1.0);
  CHECK(exact == doctest::Approx(0.6038978338634).epsilon(1e-10));
  CHECK(std::abs(lambda0(1.0, p, build_grid(p, 128)) - exact) < 1e-3);

  const auto b1 = bump(1);
  const auto g1 = build_grid(b1, 64);
  double prev = 0.0;
  for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double l = lambda0(beta, b1, g1);
    CHECK(l > prev);
    prev = l;
  }

  const double bc = beta_critical(ref(), ref_grid());
  double last = std::numeric_limits<double>::infinity();
  for (double d : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double l = lambda0(bc * (1.0 + d), ref(), ref_grid());
    CHECK(l > 0.0);
    CHECK(l < last);
    last = l;
  }
  CHECK(last < 1e-6);
  CHECK_THROWS_AS(lambda0(bc, ref(), ref_grid()), DomainError);
  CHECK_THROWS_AS(lambda0(0.5 * bc, ref(), ref_grid()), DomainError);
  CHECK(lambda0(kBetaSuper, ref(), ref_grid()) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(beta_for_lambda0(0.5, ref(), ref_grid()) == doctest::Approx(kBetaSuper).epsilon(1e-9));
}

TEST_CASE("grid refinement: beta_cr, lambda0 and psi stable from 64 to 128 nodes") {
  const auto g64 = build_grid(ref(), 64);
  CHECK(std::abs(beta_critical(ref(), g64) / beta_critical(ref(), ref_grid()) - 1.0) < 1e-5);
  CHECK(std::abs(lambda0(kBetaSuper, ref(), g64) / lambda0(kBetaSuper, ref(), ref_grid()) - 1.0) < 1e-5);
  const auto a = ground_state(kBetaSuper, ref(), g64, Normalization::L2);
  const auto b = ground_state(kBetaSuper, ref(), ref_grid(), Normalization::L2);
  for (double r : {0.0, 0.5, 1.0, 3.0}) CHECK(std::abs(a(r) / b(r) - 1.0) < 1e-5);
}

TEST_CASE("ground state: fixed point, positivity, normalization, tail") {
  const auto gs = ground_state(kBetaSuper, ref(), ref_grid(), Normalization::L2);
  CHECK(gs.fixed_point_residual() <= 1e-8);
  for (double v : gs.values()) CHECK(v > 0.0);
  for (double r : {0.0, 0.9, 1.5, 4.0, 10.0}) CHECK(gs(r) > 0.0);
  // normalization and mass by independent quadrature of the evaluator
  using boost::math::quadrature::gauss_kronrod;
  auto sq = [&](double r) { return 4.0 * std::numbers::pi * r * r * gs(r) * gs(r); };
  auto lin = [&](double r) { return 4.0 * std::numbers::pi * r * r * gs(r); };
  const double inf = std::numeric_limits<double>::infinity();
  const double l2 = gauss_kronrod<double, 61>::integrate(sq, 0.0, 1.0, 10, 1e-13) +
                    gauss_kronrod<double, 61>::integrate(sq, 1.0, inf, 10, 1e-13);
  const double mass = gauss_kronrod<double, 61>::integrate(lin, 0.0, 1.0, 10, 1e-13) +
                      gauss_kronrod<double, 61>::integrate(lin, 1.0, inf, 10, 1e-13);
  CHECK(l2 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(mass == doctest::Approx(gs.mass()).epsilon(1e-8));
  // r psi exp(kappa r) is constant on [2, 5]
  const double kappa = std::sqrt(2.0 * gs.lambda0());
  double lo = inf;
  double hi = 0.0;
  for (int i = 0; i <= 30; ++i) {
    const double r = 2.0 + 0.1 * i;
    const double c = r * gs(r) * std::exp(kappa * r);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(hi / lo - 1.0 < 0.05);
  // evaluator is continuous across the support edge
  CHECK(gs(1.0 - 1e-9) == doctest::Approx(gs(1.0 + 1e-9)).epsilon(1e-7));
  const auto table = gs.table();
  for (double r : {0.0, 0.33, 0.999, 2.5}) CHECK(table(r) == doctest::Approx(gs(r)).epsilon(1e-5));
}

TEST_CASE("ground state: dim=1 tails on both sides") {
  const auto p = bump(1);
  const auto gs = ground_state(1.0, p, build_grid(p, 64), Normalization::L2);
  CHECK(gs.fixed_point_residual() <= 1e-8);
  const double kappa = std::sqrt(2.0 * gs.lambda0());
  CHECK(gs(3.0) / gs(2.0) == doctest::Approx(std::exp(-kappa)).epsilon(1e-10));
  CHECK(gs(-3.0) == doctest::Approx(gs(3.0)).epsilon(1e-10));
}

TEST_CASE("critical ground state: 1/r tail, normalization, errors") {
  const double bc = beta_critical(ref(), ref_grid());
  const auto gs = ground_state(bc, ref(), ref_grid(), Normalization::Critical);
  CHECK(gs.lambda0() == 0.0);
  CHECK(std::isinf(gs.mass()));
  std::vector<double> lr;
  std::vector<double> ly;
  for (int i = 0; i <= 30; ++i) {
    const double r = 2.0 + 0.1 * i;
    lr.push_back(std::log(r));
    ly.push_back(std::log(gs(r)));
  }
  CHECK(std::abs(linear_fit(lr, ly).slope + 1.0) < 0.05);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < ref_grid().size(); ++i) norm2 += ref_grid().weights[i] * gs.source()[i] * gs.source()[i];
  CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(ground_state(0.5 * bc, ref(), ref_grid(), Normalization::L2), DomainError);
  CHECK_THROWS_AS(ground_state(1.1 * bc, ref(), ref_grid(), Normalization::Critical), DomainError);
}

TEST_CASE("resolvent: beta=0 reduces to G") {
  const auto& grid = ref_grid();
  std::vector<double> g;
  for (double r : grid.nodes) g.push_back(ref().eval_scalar(r));
  const std::vector<double> targets{0.0, 0.5, 2.0};
  const auto s = resolvent_apply(0.7, 0.0, ref(), grid, g, targets);
  const auto gg = radial_green_apply(0.7, g, grid, targets);
  for (int i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(gg[i]).epsilon(1e-14));
}

TEST_CASE("resolvent: S psi = psi / (lambda - lambda0)") {
  const auto gs = ground_state(kBetaSuper, ref(), ref_grid(), Normalization::L2);
  const Resolvent res(1.3, kBetaSuper, ref(), ref_grid());
  const auto u = res.apply([&](double r) { return gs(r); }, 30.0);
  for (double r : {0.0, 0.4, 0.9, 1.5, 3.0}) CHECK(std::abs(u(r) * 0.8 / gs(r) - 1.0) < 1e-6);
  CHECK(u.solve_residual < 1e-10);
}

TEST_CASE("resolvent: positivity, pole detection, 1/lambda decay") {
  std::vector<double> g;
  for (double r : ref_grid().nodes) g.push_back(ref().eval_scalar(r));
  const auto pos = resolvent_apply(0.6, kBetaSuper, ref(), ref_grid(), g, {0.0, 0.5, 0.99, 4.0});
  for (double v : pos) CHECK(v > 0.0);
  CHECK_THROWS_AS(Resolvent(0.5, kBetaSuper, ref(), ref_grid()), DomainError);
  CHECK_THROWS_AS(Resolvent(0.2, kBetaSuper, ref(), ref_grid()), DomainError);
  // subcritical: lambda = 0 is allowed in dim=3
  const double bc = beta_critical(ref(), ref_grid());
  CHECK(resolvent_apply(0.0, 0.5 * bc, ref(), ref_grid(), g, {0.0})[0] > 0.0);

  const auto plateau = testing::indicator(3, 0.5);
  const auto pgrid = build_grid(plateau, 128);
  std::vector<double> f;
  for (double r : pgrid.nodes) f.push_back(plateau.eval_scalar(r));
  std::vector<double> ll;
  std::vector<double> ls;
  for (double l : {10.0, 31.6, 100.0, 316.0, 1000.0}) {
    std::vector<double> targets;
    for (int i = 0; i <= 40; ++i) targets.push_back(i / 40.0);
    double sup = 0.0;
    for (double v : resolvent_apply(l, 1.0, plateau, pgrid, f, targets)) sup = std::max(sup, std::abs(v));
    ll.push_back(std::log(l));
    ls.push_back(std::log(sup));
  }
  CHECK(std::abs(linear_fit(ll, ls).slope + 1.0) < 0.05);
}
