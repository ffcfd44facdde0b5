#include <cmath>
#include <sstream>

#include <doctest.h>

#include "bbm/errors.hpp"
#include "bbm/pde.hpp"
#include "bbm/spectral.hpp"
#include "helpers.hpp"

using namespace bbm;
using testing::bump;

namespace {

constexpr double kBetaSuper = 5.4211401502;

PdeProblem problem(double beta, double t_end, double h, double dt, int n_max = 2) {
  PdeProblem pb(bump(3));
  pb.beta = beta;
  pb.t_end = t_end;
  pb.length = 1.0 + 6.0 * std::sqrt(t_end) + 0.5;
  pb.h = h;
  pb.dt = dt;
  pb.n_max = n_max;
  pb.output_times = {t_end};
  return pb;
}

} // namespace

TEST_CASE("beta=0 leaves rho_bar_1 = 1 and rho_bar_2 = 0") {
  for (int dim : {1, 3}) {
    PdeProblem pb(bump(dim));
    pb.beta = 0.0;
    pb.t_end = 1.0;
    pb.length = 8.0;
    pb.output_times = {0.5, 1.0};
    const auto sol = solve_rho_bar(pb);
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
      for (double v : sol.rho[0][k]) CHECK(std::abs(v - 1.0) < 1e-12);
      for (double v : sol.rho[1][k]) CHECK(std::abs(v) < 1e-12);
    }
  }
}

TEST_CASE("comparison principle and positivity of the second order") {
  const auto sol = solve_rho_bar(problem(kBetaSuper, 2.0, 0.02, 0.01));
  CHECK(sol.min_value >= 1.0 - 1e-12);
  for (double v : sol.rho[1].back()) CHECK(v >= -1e-12);
  for (std::size_t i = 1; i < sol.sup_series.size(); ++i) CHECK(sol.sup_series[i] >= sol.sup_series[i - 1]);
  CHECK(sol.value(1, 0, 0.0) > sol.value(1, 0, 2.0));
}

TEST_CASE("mesh refinement: second order, changes below 1e-3") {
  const auto a = solve_rho_bar(problem(kBetaSuper, 2.0, 0.02, 0.01));
  const auto b = solve_rho_bar(problem(kBetaSuper, 2.0, 0.01, 0.005));
  const auto c = solve_rho_bar(problem(kBetaSuper, 2.0, 0.005, 0.0025));
  for (int n : {1, 2}) {
    const double ea = std::abs(a.value(n, 0, 0.0) - c.value(n, 0, 0.0));
    const double eb = std::abs(b.value(n, 0, 0.0) - c.value(n, 0, 0.0));
    CHECK(eb / std::abs(c.value(n, 0, 0.0)) < 1e-3);
    CHECK(ea / eb > 3.0);
  }
}

TEST_CASE("dim=1 solution is symmetric and grows") {
  PdeProblem pb(bump(1));
  pb.beta = 1.0;
  pb.t_end = 2.0;
  pb.length = 10.0;
  pb.output_times = {2.0};
  const auto sol = solve_rho_bar(pb);
  for (double s : {0.0, 0.3, 0.9, 2.0}) CHECK(sol.value(1, 0, s) == doctest::Approx(sol.value(1, 0, -s)).epsilon(1e-10));
  CHECK(sol.value(1, 0, 0.0) > 1.0);
  CHECK(sol.min_value >= 1.0 - 1e-12);
}

TEST_CASE("Laplace transform of the compact-data solution equals the resolvent") {
  const auto& p = bump(3);
  const double lambda = 1.0;
  PdeProblem pb(p);
  pb.beta = kBetaSuper;
  pb.n_max = 1;
  pb.initial = InitialData::Compact;
  pb.initial_profile = [&](double s) { return p.eval_scalar(s); };
  pb.t_end = 40.0;
  pb.length = 40.0;
  pb.h = 0.01;
  pb.dt = 0.005;
  const auto sol = solve_rho_bar(pb);
  const auto& ts = sol.step_times;
  const auto& u = sol.probe[0];
  double laplace = 0.0;
  for (std::size_t i = 1; i < ts.size(); ++i)
    laplace += 0.5 * (ts[i] - ts[i - 1]) * (std::exp(-lambda * ts[i]) * u[i] + std::exp(-lambda * ts[i - 1]) * u[i - 1]);
  const auto grid = build_grid(p, 128);
  std::vector<double> g;
  for (double r : grid.nodes) g.push_back(p.eval_scalar(r));
  const double s = resolvent_apply(lambda, kBetaSuper, p, grid, g, {0.0})[0];
  CHECK(std::abs(laplace / s - 1.0) < 1e-3);
}

TEST_CASE("validation") {
  auto pb = problem(kBetaSuper, 2.0, 0.02, 0.01);
  CHECK_NOTHROW(pb.validate());
  auto bad = pb;
  bad.length = 3.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = pb;
  bad.h = 0.2;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = pb;
  bad.n_max = 4;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = pb;
  bad.initial = InitialData::Compact;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = pb;
  bad.dt = 0.5;
  try {
    bad.validate();
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("dt") != std::string::npos);
  }
}

TEST_CASE("decay_exponent") {
  std::vector<double> t;
  std::vector<double> v;
  std::vector<double> e;
  for (int i = 0; i <= 50; ++i) {
    const double x = std::pow(10.0, 1.0 + 2.0 * i / 50.0);
    t.push_back(x);
    v.push_back(3.0 * std::pow(x, -1.5));
  }
  const auto fit = decay_exponent(t, v, 10.0, 1000.0);
  CHECK(fit.exponent == doctest::Approx(-1.5).epsilon(1e-6));
  CHECK(fit.power_law);
  std::vector<double> ts;
  for (int i = 0; i <= 50; ++i) {
    ts.push_back(1.0 + 9.0 * i / 50.0);
    e.push_back(std::exp(-ts.back()));
  }
  CHECK_FALSE(decay_exponent(ts, e, 1.0, 10.0).power_law);
  v[10] = 0.0;
  CHECK_THROWS_AS(decay_exponent(t, v, 10.0, 1000.0), DomainError);
  CHECK_THROWS_AS(decay_exponent(t, v, 10.0, 10.5), ValidationError);
}

TEST_CASE("JSON config and CSV output") {
  const nlohmann::json j = {{"beta", 2.0}, {"t_end", 1.0}, {"n_max", 1}, {"initial", "compact"}, {"output_times", {0.5, 1.0}}};
  const auto pb = pde_problem_from_json(j, bump(3));
  CHECK(pb.initial == InitialData::Compact);
  CHECK(pb.length >= 1.0 + 6.0);
  CHECK_NOTHROW(pb.validate());
  const auto sol = solve_rho_bar(pb);
  REQUIRE(sol.times.size() == 2);
  std::ostringstream os;
  write_rho_bar_csv(sol, os);
  CHECK(os.str().rfind("t,x,n,rho_bar\n", 0) == 0);
  CHECK_THROWS_AS(pde_problem_from_json({{"beta", 1.0}, {"t_end", 1.0}, {"initial", "gaussian"}}, bump(3)), ValidationError);
}
