#include "bbm/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "bbm/errors.hpp"
#include "bbm/moments.hpp"
#include "bbm/pde.hpp"
#include "bbm/quadrature.hpp"
#include "bbm/sim.hpp"
#include "bbm/spectral.hpp"
#include "bbm/stats.hpp"

namespace bbm {

namespace {

using json = nlohmann::json;

class Checks {
public:
  // |value - target| <= tol
  void near(const std::string& name, double value, double target, double tol) {
    push(name, (tol - std::abs(value - target)) / tol,
         {{"value", value}, {"target", target}, {"tolerance", tol}});
  }
  void at_most(const std::string& name, double value, double limit) {
    push(name, (limit - value) / std::abs(limit), {{"value", value}, {"limit", limit}});
  }
  void at_least(const std::string& name, double value, double limit, double scale = 0.0) {
    if (scale <= 0.0) scale = std::max(std::abs(limit), 1e-300);
    push(name, (value - limit) / scale, {{"value", value}, {"at_least", limit}});
  }
  void flag(const std::string& name, bool ok, json extra = json::object()) {
    extra["ok"] = ok;
    push(name, ok ? 1.0 : -1.0, std::move(extra));
  }
  void note(const std::string& name, json value) { notes_[name] = std::move(value); }

  void finish(CriterionResult& r) const {
    r.margin = margin_;
    r.pass = margin_ >= 0.0;
    r.details = {{"checks", checks_}, {"notes", notes_}};
  }

private:
  void push(const std::string& name, double m, json d) {
    d["name"] = name;
    d["margin"] = m;
    d["pass"] = m >= 0.0;
    checks_.push_back(std::move(d));
    margin_ = std::min(margin_, m);
  }
  json checks_ = json::array();
  json notes_ = json::object();
  double margin_ = std::numeric_limits<double>::infinity();
};

Potential bump(int dim) {
  PotentialSpec s;
  s.dim = dim;
  s.shape = ShapeKind::Bump;
  s.radius = 1.0;
  s.height = 1.0;
  return make_potential(s);
}

Potential indicator(int dim, double eps) {
  PotentialSpec s;
  s.dim = dim;
  s.shape = ShapeKind::IndicatorSmoothed;
  s.radius = 1.0;
  s.height = 1.0;
  s.smoothing = eps;
  return make_potential(s);
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = a + (b - a) * i / (n - 1);
  return x;
}

std::size_t checkpoint_index(const EnsembleReport& r, double t) {
  const auto& c = r.checkpoints();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (std::abs(c[i] - t) < 1e-9) return i;
  throw ValidationError("verify: missing checkpoint");
}

// mean and standard error of n^k at checkpoint c, times `scale`
std::pair<double, double> count_moment(const EnsembleReport& r, std::size_t c, int k, double scale) {
  auto n = r.counts_at(c);
  for (double& x : n) x = std::pow(x, k) * scale;
  return {mean(n), standard_error(n)};
}

} // namespace

struct Verifier::Cache {
  Potential p3 = bump(3);
  std::optional<QuadGrid> grid3;
  std::optional<double> beta_cr;
  std::optional<double> beta_super;
  std::optional<GroundState> gs_super;
  std::optional<GroundState> gs_critical;
  std::optional<MomentTable> f_super;
  std::optional<EnsembleReport> mc_super;
  std::optional<EnsembleReport> mc_sub;
  std::optional<EnsembleReport> mc_critical;
  std::optional<RhoBarSolution> pde_super;
};

Verifier::Verifier(VerifyOptions opts) : opts_(opts), cache_(std::make_unique<Cache>()) {}
Verifier::~Verifier() = default;

// Lazily built shared inputs.
static const QuadGrid& grid3(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.grid3) c.grid3 = build_grid(c.p3, o.nodes);
  return *c.grid3;
}
static double beta_cr(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.beta_cr) c.beta_cr = beta_critical(c.p3, grid3(o, c));
  return *c.beta_cr;
}
static double beta_super(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.beta_super) c.beta_super = beta_for_lambda0(0.5, c.p3, grid3(o, c));
  return *c.beta_super;
}
static const GroundState& gs_super(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.gs_super) c.gs_super = ground_state(beta_super(o, c), c.p3, grid3(o, c), Normalization::L2);
  return *c.gs_super;
}
static const GroundState& gs_critical(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.gs_critical) c.gs_critical = ground_state(beta_cr(o, c), c.p3, grid3(o, c), Normalization::Critical);
  return *c.gs_critical;
}
static const MomentTable& f_super(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.f_super) c.f_super = supercritical_f(beta_super(o, c), 10, {0.0}, c.p3, grid3(o, c));
  return *c.f_super;
}
static const EnsembleReport& mc_super(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.mc_super) {
    SimConfig cfg(c.p3);
    cfg.beta = beta_super(o, c);
    cfg.t_end = 10.0;
    cfg.checkpoints = linspace(1.0, 10.0, 10);
    cfg.replicas = o.replicas;
    cfg.base_seed = o.seed;
    cfg.workers = o.workers;
    cfg.psi = std::make_shared<const ProfileTable>(gs_super(o, c).table());
    c.mc_super = run_ensemble(cfg);
  }
  return *c.mc_super;
}
static const EnsembleReport& mc_sub(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.mc_sub) {
    SimConfig cfg(c.p3);
    cfg.beta = 0.5 * beta_cr(o, c);
    cfg.t_end = 1e6;
    cfg.checkpoints = linspace(1e5, 1e6, 10);
    cfg.replicas = o.replicas;
    cfg.base_seed = o.seed + 100'000'007;
    cfg.workers = o.workers;
    c.mc_sub = run_ensemble(cfg);
  }
  return *c.mc_sub;
}
static const EnsembleReport& mc_critical(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.mc_critical) {
    SimConfig cfg(c.p3);
    cfg.beta = beta_cr(o, c);
    cfg.t_end = 2000.0;
    cfg.checkpoints = {125.0, 250.0, 500.0, 1000.0, 2000.0};
    cfg.replicas = o.replicas;
    cfg.base_seed = o.seed + 200'000'011;
    cfg.workers = o.workers;
    c.mc_critical = run_ensemble(cfg);
  }
  return *c.mc_critical;
}
static const RhoBarSolution& pde_super(const VerifyOptions& o, Verifier::Cache& c) {
  if (!c.pde_super) {
    PdeProblem pb(c.p3);
    pb.beta = beta_super(o, c);
    pb.h = 0.01;
    pb.dt = 0.005;
    pb.t_end = 12.0;
    pb.length = 24.0;
    pb.n_max = 2;
    pb.output_times = {6.0, 12.0};
    c.pde_super = solve_rho_bar(pb);
  }
  return *c.pde_super;
}

namespace {

void criterion1(const VerifyOptions& o, Verifier::Cache& c, Checks& ck) {
  const double nystrom = beta_cr(o, c);
  const double shoot = shooting_beta_critical(c.p3);
  ck.near("beta_cr Nystrom vs shooting (relative)", nystrom / shoot, 1.0, 0.01);
  const double target = std::numbers::pi * std::numbers::pi / 8.0;
  json ladder = json::array();
  double last = 0.0;
  for (double eps : {1e-2, 1e-3}) {
    const auto p = indicator(3, eps);
    last = beta_critical(p, build_grid(p, o.nodes));
    ladder.push_back({{"smoothing", eps}, {"beta_cr", last}});
  }
  ck.note("indicator_ladder", ladder);
  ck.near("indicator beta_cr vs pi^2/8 (relative)", last / target, 1.0, 0.02);
}

void criterion2(const VerifyOptions& o, Checks& ck) {
  const auto p = indicator(1, 1e-4);
  const double nystrom = lambda0(1.0, p, build_grid(p, o.nodes));
  ck.near("lambda0(beta=1) Nystrom vs transcendental root", nystrom, indicator_lambda0_1d(1.0, 1.0), 1e-3);
  const auto b = bump(1);
  const auto grid = build_grid(b, o.nodes);
  json ladder = json::array();
  double prev = 0.0;
  bool increasing = true;
  for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double l = lambda0(beta, b, grid);
    ladder.push_back({{"beta", beta}, {"lambda0", l}});
    increasing = increasing && l > prev;
    prev = l;
  }
  ck.flag("lambda0 strictly increasing in beta", increasing, {{"ladder", ladder}});
}

void criterion3(const VerifyOptions& o, Verifier::Cache& c, Checks& ck) {
  const auto& gs = gs_super(o, c);
  const auto r = linspace(2.0, 5.0, 31);
  std::vector<double> y;
  for (double x : r) y.push_back(std::log(x * gs(x)));
  const double kappa = std::sqrt(2.0 * gs.lambda0());
  const double rate = -linear_fit(r, y).slope;
  ck.near("supercritical tail rate vs sqrt(2 lambda0) (relative)", rate / kappa, 1.0, 0.05);
  const auto& crit = gs_critical(o, c);
  std::vector<double> lr;
  std::vector<double> ly;
  for (double x : r) {
    lr.push_back(std::log(x));
    ly.push_back(std::log(crit(x)));
  }
  ck.near("critical tail exponent", linear_fit(lr, ly).slope, -1.0, 0.05);
}

void criterion4(const VerifyOptions& o, Verifier::Cache& c, Checks& ck) {
  const auto& gs = gs_super(o, c);
  const auto& mc = mc_super(o, c);
  const double l0 = gs.lambda0();
  const double t = 10.0;
  const auto ci = checkpoint_index(mc, t);
  const auto growth = estimate_growth(mc, 5.0, 10.0);
  ck.note("growth", {{"slope", growth.slope}, {"ci", {growth.ci_lo, growth.ci_hi}}, {"lambda0", l0}});
  ck.note("beta", gs.beta());
  ck.note("truncated_replicas", mc.truncated_count());
  ck.at_most("mean count at t_end", mc.raw_moment(ci, 1), 1000.0);
  ck.near("growth slope vs lambda0 (relative)", growth.slope / l0, 1.0, 0.05);
  const auto [m1, se1] = count_moment(mc, ci, 1, std::exp(-l0 * t));
  ck.near("scaled first moment vs (int psi) psi(x0)", m1, gs.mass() * gs(0.0), 3.0 * se1);
  const auto& f = f_super(o, c);
  const auto [m2, se2] = count_moment(mc, ci, 2, std::exp(-2.0 * l0 * t));
  ck.near("scaled second moment vs (int psi)^2 f_2(x0)", m2, gs.mass() * gs.mass() * f.f[1][0], 3.0 * se2);
}

void criterion5(const VerifyOptions& o, Verifier::Cache& c, Checks& ck) {
  const auto& mc = mc_super(o, c);
  std::vector<std::size_t> use;
  for (double t : {2.0, 4.0, 6.0, 8.0, 10.0}) use.push_back(checkpoint_index(mc, t));
  const auto m = martingale_check(mc, gs_super(o, c), use);
  ck.note("means", m.mean);
  ck.note("standard_errors", m.se);
  ck.note("psi_x0", m.psi_x0);
  ck.flag("at least five checkpoints", m.mean.size() >= 5);
  ck.at_most("largest pairwise z", m.flatness, 3.0);
}

void criterion6(const VerifyOptions& o, Verifier::Cache& c, Checks& ck) {
  const double beta = 0.5 * beta_cr(o, c);
  const auto f = subcritical_f(beta, 2, {0.0}, c.p3, grid3(o, c));
  const auto& mc = mc_sub(o, c);
  const auto last = mc.checkpoints().size() - 1;
  const auto [m1, se1] = count_moment(mc, last, 1, 1.0);
  const auto [m2, se2] = count_moment(mc, last, 2, 1.0);
  ck.note("t", mc.checkpoints().back());
  ck.near("mean count vs f_1(x0)", m1, f.f[0][0], 3.0 * se1);
  ck.near("second moment vs f_1 + f_2", m2, f.f[0][0] + f.f[1][0], 3.0 * se2);
  const auto g = estimate_growth(mc, mc.checkpoints().front(), mc.checkpoints().back());
  ck.note("growth", {{"slope", g.slope}, {"ci", {g.ci_lo, g.ci_hi}}});
  ck.at_most("|growth slope| in CI half-widths", std::abs(g.slope) / g.half_width(), 2.0);
}

void criterion7(const VerifyOptions& o, Verifier::Cache& c, Checks& ck) {
  PdeProblem pb(c.p3);
  pb.beta = 0.5 * beta_cr(o, c);
  pb.initial = InitialData::Compact;
  pb.n_max = 1;
  pb.h = 0.05;
  pb.dt = 0.05;
  pb.t_end = 400.0;
  pb.length = 1.0 + 6.0 * std::sqrt(pb.t_end) + 1.0;
  const auto sol = solve_rho_bar(pb);
  const auto fit = decay_exponent(sol.step_times, sol.sup_series, 100.0, 400.0);
  ck.note("curvature", fit.curvature);
  ck.near("sup-norm decay exponent", fit.exponent, -1.5, 0.2);
}

void criterion8(const VerifyOptions& o, Verifier::Cache& c, Checks& ck) {
  const auto& gs = gs_super(o, c);
  const auto& pde = pde_super(o, c);
  const double t = 12.0;
  const double scaled = std::exp(-gs.lambda0() * t) * pde.value(1, 1, 0.0);
  const double target = gs.mass() * gs(0.0);
  ck.near("PDE exp(-lambda0 t) rho_1 vs (int psi) psi(x0) (relative)", scaled / target, 1.0, 0.02);
  const auto& mc = mc_super(o, c);
  const auto ci = checkpoint_index(mc, 6.0);
  const auto raw = raw_count_moments({pde.value(1, 0, 0.0), pde.value(2, 0, 0.0)}, 2);
  const auto [m1, se1] = count_moment(mc, ci, 1, 1.0);
  const auto [m2, se2] = count_moment(mc, ci, 2, 1.0);
  ck.near("MC mean vs rho_1 at t=6", m1, raw[0], 3.0 * se1);
  ck.near("MC second moment vs rho_1 + rho_2 at t=6", m2, raw[1], 3.0 * se2);
}

void criterion9(const VerifyOptions& o, Verifier::Cache& c, Checks& ck) {
  const auto& mc = mc_critical(o, c);
  const auto& cp = mc.checkpoints();
  std::vector<double> means;
  bool monotone = true;
  for (std::size_t i = 0; i < cp.size(); ++i) {
    means.push_back(mc.raw_moment(i, 1));
    if (i > 0) monotone = monotone && means[i] >= means[i - 1];
  }
  ck.note("checkpoints", cp);
  ck.note("means", means);
  ck.note("truncated_replicas", mc.truncated_count());
  ck.flag("mean count non-decreasing", monotone);
  const auto first = mc.counts_at(0);
  const auto last = mc.counts_at(cp.size() - 1);
  std::vector<double> diff(first.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = last[i] - first[i];
  ck.at_least("growth of the mean in standard errors", mean(diff) / standard_error(diff), 3.0);
  const auto t1 = checkpoint_index(mc, 1000.0);
  const auto t2 = checkpoint_index(mc, 2000.0);
  ck.at_most("KS distance between counts at T and 2T", ks_distance(mc.counts_at(t1), mc.counts_at(t2)), 0.03);

  const double bc = beta_cr(o, c);
  const auto& crit = gs_critical(o, c);
  const auto xs = linspace(0.0, 5.0, 51);
  std::vector<double> psi;
  for (double x : xs) psi.push_back(crit(x));
  std::vector<double> scal;
  json rows = json::array();
  double worst_corr = 1.0;
  for (double ratio : {0.90, 0.95, 0.98}) {
    const double beta = ratio * bc;
    const auto f = subcritical_f(beta, 1, xs, c.p3, grid3(o, c));
    std::vector<double> phi;
    for (double v : f.f[0]) phi.push_back(v - 1.0);
    const double s = (bc - beta) * phi[0];
    const double corr = correlation(phi, psi);
    scal.push_back(s);
    worst_corr = std::min(worst_corr, corr);
    rows.push_back({{"ratio", ratio}, {"scaled", s}, {"correlation", corr}});
  }
  ck.note("near_critical", rows);
  const auto [lo, hi] = std::minmax_element(scal.begin(), scal.end());
  ck.at_most("near-critical scaling variation", (*hi - *lo) / *hi, 0.10);
  ck.at_least("profile correlation with critical ground state", worst_corr, 0.999, 0.001);
}

void criterion10(const VerifyOptions& o, Verifier::Cache& c, Checks& ck) {
  const auto& f = f_super(o, c);
  const double a = factorial_envelope(f, 3);
  ck.note("A", a);
  double worst = 0.0;
  double fact = 1.0;
  json ratios = json::array();
  for (int n = 1; n <= f.order; ++n) {
    fact *= n;
    const double r = f.sup_norm(n) / (std::pow(a, 2 * n - 1) * fact);
    ratios.push_back(r);
    if (n >= 4) worst = std::max(worst, r);
  }
  ck.note("envelope_ratios", ratios);
  ck.at_most("max ||f_n|| / (A^(2n-1) n!) for 4 <= n <= 10", worst, 1.0);
  bool stirling = true;
  for (int n = 1; n <= 8; ++n)
    for (int k = 1; k <= n; ++k)
      stirling = stirling && stirling2(n, k) == static_cast<BigCount>(count_partitions(n, k));
  ck.flag("Stirling numbers match partition enumeration (n <= 8)", stirling);
}

const char* criterion_name(int id) {
  switch (id) {
  case 1: return "beta_cr two-oracle agreement (dim=3)";
  case 2: return "lambda0 two-oracle agreement (dim=1)";
  case 3: return "ground-state tails";
  case 4: return "supercritical growth";
  case 5: return "martingale flatness";
  case 6: return "subcritical limit";
  case 7: return "subcritical decay exponent";
  case 8: return "PDE vs spectral and Monte Carlo";
  case 9: return "critical regime";
  case 10: return "moment-growth sanity";
  default: throw ValidationError("verify: unknown criterion " + std::to_string(id));
  }
}

} // namespace

CriterionResult Verifier::run(int id) {
  CriterionResult r;
  r.id = id;
  r.name = criterion_name(id);
  Checks ck;
  const auto start = std::chrono::steady_clock::now();
  auto& c = *cache_;
  switch (id) {
  case 1: criterion1(opts_, c, ck); break;
  case 2: criterion2(opts_, ck); break;
  case 3: criterion3(opts_, c, ck); break;
  case 4: criterion4(opts_, c, ck); break;
  case 5: criterion5(opts_, c, ck); break;
  case 6: criterion6(opts_, c, ck); break;
  case 7: criterion7(opts_, c, ck); break;
  case 8: criterion8(opts_, c, ck); break;
  case 9: criterion9(opts_, c, ck); break;
  case 10: criterion10(opts_, c, ck); break;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (id == 1 || id == 2) ck.at_most("runtime seconds", r.seconds, 10.0);
  if (id == 4 || id == 6) ck.at_most("runtime seconds", r.seconds, 300.0);
  ck.finish(r);
  return r;
}

std::vector<CriterionResult> Verifier::run(const std::vector<int>& ids) {
  std::vector<CriterionResult> out;
  for (int id : ids) out.push_back(run(id));
  return out;
}

std::vector<int> suite_criteria(const std::string& suite) {
  if (suite == "super") return {3, 4, 5, 8, 10};
  if (suite == "sub") return {6, 7};
  if (suite == "critical") return {1, 9};
  if (suite == "all") return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  throw ValidationError("verify: unknown suite '" + suite + "'");
}

nlohmann::json to_json(const CriterionResult& r) {
  return {{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"margin", r.margin},
          {"seconds", r.seconds}, {"details", r.details}};
}

double shooting_beta_critical(const Potential& p) {
  namespace odeint = boost::numeric::odeint;
  if (p.dim() != 3) throw ValidationError("shooting: dim=3 only");
  const double radius = p.support_radius();
  // u = r psi, u'' = -2 beta v u, u(0) = 0, u'(0) = 1; beta_cr makes u'(R) = 0
  auto slope_at_edge = [&](double beta) {
    using State = std::array<double, 2>;
    State y{0.0, 1.0};
    auto rhs = [&](const State& s, State& d, double r) {
      d[0] = s[1];
      d[1] = -2.0 * beta * p.eval_scalar(r) * s[0];
    };
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(1e-13, 1e-13);
    odeint::integrate_adaptive(stepper, rhs, y, 0.0, radius, 1e-3);
    return y[1];
  };
  double lo = 0.0;
  double hi = 0.25;
  while (slope_at_edge(hi) > 0.0) {
    lo = hi;
    hi += 0.25;
    if (hi > 1e4) throw NumericalError("shooting: no sign change");
  }
  boost::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      slope_at_edge, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (a + b);
}

double indicator_lambda0_1d(double beta, double a) {
  if (!(beta > 0.0) || !(a > 0.0)) throw DomainError("indicator_lambda0_1d: beta and a must be positive");
  // even ground state: cos(k x) inside, exp(-kappa |x|) outside
  auto f = [&](double lambda) {
    const double k = std::sqrt(2.0 * (beta - lambda));
    return k * std::tan(k * a) - std::sqrt(2.0 * lambda);
  };
  const double kmax = 0.5 * std::numbers::pi / a;
  double lo = std::max(0.0, beta - 0.5 * kmax * kmax) * (1.0 + 1e-15) + 1e-300;
  double hi = beta;
  boost::uintmax_t iters = 200;
  const auto [x, y] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (x + y);
}

std::uint64_t count_partitions(int n, int k) {
  if (n < 0 || k < 0 || n > 16) throw DomainError("count_partitions: n must lie in [0, 16]");
  if (n == 0) return k == 0 ? 1 : 0;
  // restricted growth strings a_1 = 0, a_i <= 1 + max(a_1..a_{i-1})
  std::vector<int> a(n, 0);
  std::vector<int> top(n, 0);
  std::uint64_t count = 0;
  while (true) {
    if (top[n - 1] + 1 == k) ++count;
    int i = n - 1;
    while (i > 0 && a[i] == top[i - 1] + 1) --i;
    if (i == 0) break;
    ++a[i];
    top[i] = std::max(top[i - 1], a[i]);
    for (int j = i + 1; j < n; ++j) {
      a[j] = 0;
      top[j] = top[i];
    }
  }
  return count;
}

} // namespace bbm
