#include "bbm/pde.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "bbm/errors.hpp"
#include "bbm/stats.hpp"

namespace bbm {

namespace {

// Tridiagonal system with constant coefficients, factored once (Thomas).
class Tridiagonal {
public:
  Tridiagonal(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)), c_(diag.size()), d_(diag.size()) {
    const std::size_t n = diag.size();
    d_[0] = diag[0];
    for (std::size_t i = 1; i < n; ++i) {
      c_[i] = lower_[i] / d_[i - 1];
      d_[i] = diag[i] - c_[i] * upper_[i - 1];
    }
  }

  void solve(std::vector<double>& x) const {
    const std::size_t n = x.size();
    for (std::size_t i = 1; i < n; ++i) x[i] -= c_[i] * x[i - 1];
    x[n - 1] /= d_[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (x[i] - upper_[i] * x[i + 1]) / d_[i];
  }

private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> c_;
  std::vector<double> d_;
};

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

} // namespace

void PdeProblem::validate() const {
  const double support = potential.support_radius();
  if (n_max < 1 || n_max > 3) throw ValidationError("pde: n_max must be 1, 2 or 3");
  if (initial == InitialData::Compact && n_max != 1)
    throw ValidationError("pde: compact initial data is solved for the first order only");
  if (!(beta >= 0.0)) throw ValidationError("pde: beta must be nonnegative");
  if (!(t_end > 0.0)) throw ValidationError("pde: t_end must be positive");
  if (!(h > 0.0) || !(dt > 0.0)) throw ValidationError("pde: h and dt must be positive");
  const double needed = support + 6.0 * std::sqrt(t_end);
  if (length < needed) {
    std::ostringstream os;
    os << "pde: domain half-width " << length << " is below support + 6 sqrt(t_end) = " << needed;
    throw ValidationError(os.str());
  }
  if (h > 0.1 * support) {
    std::ostringstream os;
    os << "pde: mesh width " << h << " does not resolve the support; use h <= " << 0.1 * support;
    throw ValidationError(os.str());
  }
  const double rate = beta * potential.v_max();
  if (dt * rate > 0.5) {
    std::ostringstream os;
    os << "pde: dt * beta * v_max = " << dt * rate << " exceeds 0.5; suggested dt <= " << 0.5 / rate;
    throw ValidationError(os.str());
  }
  for (double t : output_times)
    if (t < 0.0 || t > t_end) throw ValidationError("pde: output times must lie in [0, t_end]");
}

double RhoBarSolution::value(int n, std::size_t snapshot, double s) const {
  const auto& r = rho.at(n - 1).at(snapshot);
  if (dim == 3) s = std::abs(s);
  if (s <= mesh.front()) return r.front();
  if (s >= mesh.back()) return r.back();
  const double h = mesh[1] - mesh[0];
  const auto i = std::min(static_cast<std::size_t>((s - mesh.front()) / h), mesh.size() - 2);
  const double t = (s - mesh[i]) / h;
  return (1.0 - t) * r[i] + t * r[i + 1];
}

RhoBarSolution solve_rho_bar(const PdeProblem& pb) {
  pb.validate();
  const int dim = pb.dim();
  const double h = pb.h;
  const double dt = pb.dt;
  const auto cells = static_cast<std::size_t>(std::llround(pb.length / h));
  // dim=3: unknowns u_i = r_i rho_i at r_i = i h, i = 1..cells (u_0 = 0).
  // dim=1: unknowns rho_i at x_i = -L + i h, i = 0..2 cells.
  const std::size_t n = dim == 3 ? cells : 2 * cells + 1;
  std::vector<double> coord(n);
  for (std::size_t i = 0; i < n; ++i)
    coord[i] = dim == 3 ? static_cast<double>(i + 1) * h : -pb.length + static_cast<double>(i) * h;
  std::vector<double> bv(n);
  for (std::size_t i = 0; i < n; ++i) bv[i] = pb.beta * pb.potential.eval_scalar(coord[i]);

  // A = D2 / 2 + beta v, assembled as lower/diag/upper.
  const double d = 0.5 / (h * h);
  std::vector<double> lo(n, d);
  std::vector<double> di(n);
  std::vector<double> up(n, d);
  for (std::size_t i = 0; i < n; ++i) di[i] = -2.0 * d + bv[i];
  lo[0] = 0.0;
  up[n - 1] = 0.0;
  if (dim == 3) {
    // ghost u_{N+1} = u_{N-1} + 2 h u_N / L  (rho' = 0 at r = L)
    lo[n - 1] = 2.0 * d;
    di[n - 1] += 2.0 * d * h / coord[n - 1];
  } else {
    up[0] = 2.0 * d;
    lo[n - 1] = 2.0 * d;
  }
  std::vector<double> il(n);
  std::vector<double> id(n);
  std::vector<double> iu(n);
  for (std::size_t i = 0; i < n; ++i) {
    il[i] = -0.5 * dt * lo[i];
    id[i] = 1.0 - 0.5 * dt * di[i];
    iu[i] = -0.5 * dt * up[i];
  }
  const Tridiagonal implicit(il, id, iu);
  const auto explicit_apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double a = di[i] * x[i];
      if (i > 0) a += lo[i] * x[i - 1];
      if (i + 1 < n) a += up[i] * x[i + 1];
      out[i] = x[i] + 0.5 * dt * a;
    }
  };

  // state[k] holds the unknowns of rho_bar_{k+1}
  std::vector<std::vector<double>> state(pb.n_max, std::vector<double>(n, 0.0));
  std::function<double(double)> profile = pb.initial_profile;
  if (!profile) {
    const double radius = pb.potential.support_radius();
    profile = [radius](double s) {
      const double z = s / radius;
      return z * z < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - z * z)) : 0.0;
    };
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double rho0 = pb.initial == InitialData::Ones ? 1.0 : profile(coord[i]);
    state[0][i] = dim == 3 ? coord[i] * rho0 : rho0;
  }

  RhoBarSolution sol;
  sol.dim = dim;
  sol.mesh.push_back(dim == 3 ? 0.0 : coord.front());
  for (std::size_t i = dim == 3 ? 0 : 1; i < n; ++i) sol.mesh.push_back(coord[i]);
  sol.rho.assign(pb.n_max, {});
  sol.probe.assign(pb.n_max, {});
  sol.min_value = std::numeric_limits<double>::infinity();

  // rho values on sol.mesh from the unknowns
  const auto to_rho = [&](const std::vector<double>& u) {
    std::vector<double> r(sol.mesh.size());
    if (dim == 3) {
      r[0] = (8.0 * u[0] - u[1]) / (6.0 * h);
      for (std::size_t i = 0; i < n; ++i) r[i + 1] = u[i] / coord[i];
    } else {
      r = u;
    }
    return r;
  };
  const auto probe_value = [&](const std::vector<double>& r) {
    double s = dim == 3 ? std::abs(pb.probe) : pb.probe;
    if (s <= sol.mesh.front()) return r.front();
    if (s >= sol.mesh.back()) return r.back();
    const auto i = std::min(static_cast<std::size_t>((s - sol.mesh.front()) / h), sol.mesh.size() - 2);
    const double t = (s - sol.mesh[i]) / h;
    return (1.0 - t) * r[i] + t * r[i + 1];
  };

  const auto steps = static_cast<std::size_t>(std::llround(pb.t_end / dt));
  std::vector<std::size_t> snapshot_steps;
  for (double t : pb.output_times) snapshot_steps.push_back(static_cast<std::size_t>(std::llround(t / dt)));

  const auto record = [&](std::size_t step) {
    const double t = static_cast<double>(step) * dt;
    sol.step_times.push_back(t);
    std::vector<std::vector<double>> rhos;
    for (int k = 0; k < pb.n_max; ++k) {
      rhos.push_back(to_rho(state[k]));
      sol.probe[k].push_back(probe_value(rhos.back()));
    }
    sol.sup_series.push_back(*std::max_element(rhos[0].begin(), rhos[0].end()));
    sol.min_value = std::min(sol.min_value, *std::min_element(rhos[0].begin(), rhos[0].end()));
    for (std::size_t s = 0; s < snapshot_steps.size(); ++s) {
      if (snapshot_steps[s] != step) continue;
      if (sol.times.size() <= s) sol.times.resize(s + 1);
      sol.times[s] = t;
      for (int k = 0; k < pb.n_max; ++k) {
        if (sol.rho[k].size() <= s) sol.rho[k].resize(s + 1);
        sol.rho[k][s] = rhos[k];
      }
    }
  };

  // source of order m (1-based) in the unknowns' variables
  const auto source = [&](int m, const std::vector<std::vector<double>>& st, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (int k = 1; k < m; ++k) {
      const double c = binomial(m, k);
      for (std::size_t i = 0; i < n; ++i) {
        const double prod = st[k - 1][i] * st[m - k - 1][i];
        out[i] += c * (dim == 3 ? prod / coord[i] : prod);
      }
    }
    for (std::size_t i = 0; i < n; ++i) out[i] *= bv[i];
  };

  record(0);
  std::vector<double> rhs(n);
  std::vector<double> s_old(n);
  std::vector<double> s_new(n);
  for (std::size_t step = 1; step <= steps; ++step) {
    const auto previous = state;
    for (int m = 1; m <= pb.n_max; ++m) {
      explicit_apply(previous[m - 1], rhs);
      if (m > 1) {
        source(m, previous, s_old);
        source(m, state, s_new); // lower orders already advanced
        for (std::size_t i = 0; i < n; ++i) rhs[i] += 0.5 * dt * (s_old[i] + s_new[i]);
      }
      implicit.solve(rhs);
      state[m - 1] = rhs;
    }
    record(step);
  }
  for (int k = 0; k < pb.n_max; ++k)
    if (sol.rho[k].size() != pb.output_times.size())
      throw NumericalError("pde: snapshot bookkeeping failed");
  return sol;
}

PdeProblem pde_problem_from_json(const nlohmann::json& j, const Potential& p) {
  PdeProblem pb(p);
  try {
    pb.beta = j.at("beta").get<double>();
    pb.t_end = j.at("t_end").get<double>();
    pb.length = j.value("length", p.support_radius() + 6.0 * std::sqrt(pb.t_end) + 1.0);
    pb.h = j.value("h", pb.h);
    pb.dt = j.value("dt", pb.dt);
    pb.n_max = j.value("n_max", pb.n_max);
    const std::string init = j.value("initial", std::string("ones"));
    if (init == "ones") {
      pb.initial = InitialData::Ones;
    } else if (init == "compact") {
      pb.initial = InitialData::Compact;
    } else {
      throw ValidationError("pde: unknown initial data '" + init + "'");
    }
    pb.output_times = j.value("output_times", std::vector<double>{pb.t_end});
    pb.probe = j.value("probe", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("pde: ") + e.what());
  }
  pb.validate();
  return pb;
}

void write_rho_bar_csv(const RhoBarSolution& sol, std::ostream& out) {
  out << "t,x,n,rho_bar\n";
  out << std::setprecision(17);
  for (std::size_t s = 0; s < sol.times.size(); ++s)
    for (std::size_t n = 0; n < sol.rho.size(); ++n)
      for (std::size_t i = 0; i < sol.mesh.size(); ++i)
        out << sol.times[s] << ',' << sol.mesh[i] << ',' << n + 1 << ',' << sol.rho[n][s][i] << '\n';
}

DecayFit decay_exponent(const std::vector<double>& times, const std::vector<double>& values,
                        double t_lo, double t_hi) {
  std::vector<double> lt;
  std::vector<double> lv;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t_lo || times[i] > t_hi) continue;
    if (!(values[i] > 0.0) || !(times[i] > 0.0))
      throw DomainError("decay_exponent: series must be positive in the window");
    lt.push_back(std::log(times[i]));
    lv.push_back(std::log(values[i]));
  }
  if (lt.size() < 3) throw ValidationError("decay_exponent: need at least three points in the window");
  DecayFit fit;
  fit.exponent = linear_fit(lt, lv).slope;

  // quadratic fit in centred log-time for the curvature diagnostic
  const double mid = 0.5 * (lt.front() + lt.back());
  const double width = lt.back() - lt.front();
  Eigen::MatrixXd a(lt.size(), 3);
  Eigen::VectorXd b(lt.size());
  for (std::size_t i = 0; i < lt.size(); ++i) {
    const double s = (lt[i] - mid) / width;
    a(i, 0) = 1.0;
    a(i, 1) = s;
    a(i, 2) = s * s;
    b(i) = lv[i];
  }
  const Eigen::Vector3d coef = a.colPivHouseholderQr().solve(b);
  fit.curvature = std::abs(coef(2)) / std::max(std::abs(coef(1)), 1e-300);
  fit.power_law = fit.curvature < 0.1;
  return fit;
}

} // namespace bbm
