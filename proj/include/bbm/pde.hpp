#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "bbm/potential.hpp"

namespace bbm {

enum class InitialData {
  /// rho_bar_1(0, .) = 1, rho_bar_n(0, .) = 0 for n >= 2.
  Ones,
  /// rho(0, .) = compactly supported profile (first order only).
  Compact,
};

/// Integrated moment hierarchy
///   d/dt rho_1 = Delta rho_1 / 2 + beta v rho_1,
///   d/dt rho_n = Delta rho_n / 2 + beta v (rho_n + sum_{k=1}^{n-1} C(n,k) rho_k rho_{n-k}),
/// on [0, L] (dim=3, radial) or [-L, L] (dim=1) with homogeneous Neumann
/// conditions at the outer boundary.
struct PdeProblem {
  explicit PdeProblem(Potential p) : potential(std::move(p)) {}

  Potential potential;
  double beta = 0.0;
  double length = 10.0;
  double h = 0.02;
  double dt = 0.01;
  double t_end = 1.0;
  int n_max = 2;
  InitialData initial = InitialData::Ones;
  /// Compact initial profile in the scalar coordinate; defaults to a unit
  /// bump over the support of v.
  std::function<double(double)> initial_profile;
  /// Snapshot times (each rounded to the nearest time step).
  std::vector<double> output_times;
  /// Scalar coordinate recorded at every time step.
  double probe = 0.0;

  int dim() const { return potential.dim(); }
  /// Throws ValidationError, suggesting a usable dt or length where possible.
  void validate() const;
};

struct RhoBarSolution {
  int dim = 3;
  std::vector<double> mesh;
  std::vector<double> times;
  /// rho[n-1][snapshot][node].
  std::vector<std::vector<std::vector<double>>> rho;
  std::vector<double> step_times;
  /// probe[n-1][step]: rho_bar_n at the probe point.
  std::vector<std::vector<double>> probe;
  /// sup over the mesh of rho_bar_1 at every step.
  std::vector<double> sup_series;
  /// Smallest value of rho_bar_1 seen (negative values flag trouble).
  double min_value = 0.0;

  /// rho_bar_n at snapshot index `snapshot`, linear interpolation in s.
  double value(int n, std::size_t snapshot, double s) const;
};

/// Crank-Nicolson in time, second-order differences in space; the source of
/// order n (built from lower orders, already advanced) enters as the average
/// of its values at the two time levels. dim=3 is solved for u = r rho.
RhoBarSolution solve_rho_bar(const PdeProblem& problem);

struct DecayFit {
  double exponent = 0.0;
  /// Quadratic coefficient of log value against log t, scaled by the
  /// window's log-width; large values mean the series is not a power law.
  double curvature = 0.0;
  bool power_law = true;
};

/// Least-squares slope of log value against log t over t in [t_lo, t_hi].
DecayFit decay_exponent(const std::vector<double>& times, const std::vector<double>& values,
                        double t_lo, double t_hi);

/// Parses the "pde" block of a config; potential is supplied separately.
/// Keys: beta, length, h, dt, t_end, n_max, initial ("ones" | "compact"),
/// output_times, probe.
PdeProblem pde_problem_from_json(const nlohmann::json& j, const Potential& p);

/// CSV rows (t, x, n, rho_bar) over all snapshots.
void write_rho_bar_csv(const RhoBarSolution& sol, std::ostream& out);

} // namespace bbm
