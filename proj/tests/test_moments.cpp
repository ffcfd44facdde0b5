#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include "bbm/errors.hpp"
#include "bbm/moments.hpp"
#include "bbm/spectral.hpp"
#include "bbm/verify.hpp"
#include "helpers.hpp"

using namespace bbm;
using testing::bump;

namespace {

const Potential& ref() {
  static const Potential p = bump(3);
  return p;
}
const QuadGrid& ref_grid() {
  static const QuadGrid g = build_grid(ref(), 128);
  return g;
}
constexpr double kBetaSuper = 5.4211401502;

const MomentTable& super_table() {
  static const MomentTable t = supercritical_f(kBetaSuper, 10, {0.0, 0.5, 2.0}, ref(), ref_grid());
  return t;
}

} // namespace

TEST_CASE("stirling2: small values and partition counts") {
  CHECK(stirling2(3, 2) == 3);
  CHECK(stirling2(4, 2) == 7);
  CHECK(stirling2(5, 3) == 25);
  for (int n = 1; n <= 30; ++n) {
    CHECK(stirling2(n, n) == 1);
    CHECK(stirling2(n, 1) == 1);
  }
  for (int n = 1; n <= 8; ++n)
    for (int k = 1; k <= n; ++k) CHECK(stirling2(n, k) == count_partitions(n, k));
  CHECK(to_string(stirling2(30, 15)) == "12879868072770626040000");
  CHECK_THROWS_AS(stirling2(31, 2), DomainError);
  CHECK_THROWS_AS(stirling2(4, 5), DomainError);
  CHECK_THROWS_AS(stirling2(4, 0), DomainError);
}

TEST_CASE("supercritical f_1 is psi and f_2 matches a direct resolvent solve") {
  const auto& t = super_table();
  const auto gs = ground_state(kBetaSuper, ref(), ref_grid(), Normalization::L2);
  for (std::size_t j = 0; j < t.points.size(); ++j) CHECK(t.f[0][j] == doctest::Approx(gs(t.points[j])).epsilon(1e-12));
  CHECK(t.mass == doctest::Approx(gs.mass()).epsilon(1e-12));
  std::vector<double> src;
  for (std::size_t i = 0; i < ref_grid().size(); ++i) {
    const double r = ref_grid().nodes[i];
    src.push_back(2.0 * kBetaSuper * ref().eval_scalar(r) * gs(r) * gs(r));
  }
  const auto f2 = resolvent_apply(2.0 * t.lambda0, kBetaSuper, ref(), ref_grid(), src, t.points);
  for (std::size_t j = 0; j < t.points.size(); ++j) CHECK(t.f[1][j] == doctest::Approx(f2[j]).epsilon(1e-10));
}

TEST_CASE("supercritical: positivity, symmetric halving, residuals") {
  const auto& t = super_table();
  for (const auto& row : t.f)
    for (double v : row) CHECK(v > 0.0);
  for (double r : t.solve_residuals) CHECK(r < 1e-10);
  MomentOptions opts;
  opts.symmetric_halving = true;
  const auto h = supercritical_f(kBetaSuper, 10, t.points, ref(), ref_grid(), opts);
  for (int n = 0; n < 10; ++n)
    for (std::size_t j = 0; j < t.points.size(); ++j) CHECK(std::abs(h.f[n][j] / t.f[n][j] - 1.0) < 1e-12);
}

TEST_CASE("supercritical: envelope, xi moments, Carleman sums") {
  const auto& t = super_table();
  const double a = factorial_envelope(t);
  double fact = 1.0;
  for (int n = 1; n <= 10; ++n) {
    fact *= n;
    CHECK(t.sup_norm(n) <= std::pow(a, 2 * n - 1) * fact);
  }
  const auto xi = xi_moments(t, 0.0, 3);
  CHECK(xi[0] == doctest::Approx(t.mass * t.f[0][0]));
  CHECK(xi[2] == doctest::Approx(std::pow(t.mass, 3) * t.f[2][0]));
  const auto c = carleman_partial_sums(t, 0.0);
  REQUIRE(c.size() == 10);
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] > c[i - 1]);
}

TEST_CASE("supercritical: grid refinement and errors") {
  const auto coarse = supercritical_f(kBetaSuper, 4, {0.0}, ref(), build_grid(ref(), 64));
  for (int n = 0; n < 4; ++n) CHECK(std::abs(coarse.f[n][0] / super_table().f[n][0] - 1.0) < 1e-4);
  CHECK_THROWS_AS(supercritical_f(kBetaSuper, 13, {0.0}, ref(), ref_grid()), DomainError);
  CHECK_THROWS_AS(supercritical_f(kBetaSuper, 0, {0.0}, ref(), ref_grid()), DomainError);
  CHECK_THROWS_AS(supercritical_f(1.0, 2, {0.0}, ref(), ref_grid()), DomainError);
}

TEST_CASE("subcritical: f_1 above 1, small-beta limit, limit moments") {
  const double bc = beta_critical(ref(), ref_grid());
  const auto t = subcritical_f(0.5 * bc, 4, {0.0, 3.0}, ref(), ref_grid());
  for (double v : t.f[0]) CHECK(v > 1.0);
  CHECK(t.f[0][0] > t.f[0][1]);
  const auto m = limit_moments_sub(t, 0.0, 3);
  CHECK(m[0] == doctest::Approx(t.f[0][0]));
  CHECK(m[1] == doctest::Approx(t.f[0][0] + t.f[1][0]));
  CHECK(m[2] == doctest::Approx(t.f[0][0] + 3.0 * t.f[1][0] + t.f[2][0]));

  // first order in beta: f_1(0) - 1 ~ beta G_0 v(0) = 2 beta int_0^1 v(r) r dr
  const double g0v = 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                               [](double r) { return ref().eval_scalar(r) * r; }, 0.0, 1.0, 10, 1e-14);
  double prev = t.f[0][0];
  for (double beta : {0.1, 0.01, 0.001}) {
    const auto s = subcritical_f(beta, 2, {0.0}, ref(), ref_grid());
    CHECK(s.f[0][0] < prev);
    CHECK((s.f[0][0] - 1.0) / beta > g0v);
    prev = s.f[0][0];
  }
  CHECK((prev - 1.0) / 0.001 == doctest::Approx(g0v).epsilon(1e-3));
  CHECK_THROWS_AS(subcritical_f(1.1 * bc, 2, {0.0}, ref(), ref_grid()), DomainError);
  CHECK_THROWS_AS(subcritical_f(0.5, 2, {0.0}, bump(1), build_grid(bump(1), 64)), DomainError);
}

TEST_CASE("raw_count_moments") {
  const auto ones = raw_count_moments({1.0, 0.0, 0.0, 0.0}, 4);
  for (double v : ones) CHECK(v == 1.0);
  const std::vector<double> rb{2.0, 5.0, 11.0};
  const auto m = raw_count_moments(rb, 3);
  CHECK(m[0] == 2.0);
  CHECK(m[1] == 7.0);
  CHECK(m[2] == 2.0 + 15.0 + 11.0);
  CHECK_THROWS_AS(raw_count_moments(rb, 4), ValidationError);
}
