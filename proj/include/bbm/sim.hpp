#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbm/moments.hpp"
#include "bbm/potential.hpp"
#include "bbm/rng.hpp"
#include "bbm/spectral.hpp"

namespace bbm {

/// Ball {|x - center| <= radius} (an interval in dim=1).
struct CountRegion {
  Point center{};
  double radius = 1.0;
  bool contains(const Point& x, int dim) const;
};

struct SimConfig {
  explicit SimConfig(Potential p) : potential(std::move(p)) {}

  Potential potential;
  double beta = 0.0;
  Point x0{};
  double t_end = 1.0;
  std::vector<double> checkpoints;
  int replicas = 1;
  std::uint64_t base_seed = 1;
  std::optional<CountRegion> count_region;
  std::size_t max_particles = 1'000'000;
  /// Worker threads for run_ensemble; does not affect results.
  int workers = 1;
  /// Ground state profile for the psi-weighted scores, when supplied.
  std::shared_ptr<const ProfileTable> psi;
  /// Test mode: branching rate beta * constant_field everywhere, ignoring the
  /// potential. Not reachable from the JSON config schema.
  std::optional<double> constant_field;

  int dim() const { return potential.dim(); }
  /// Throws ValidationError on violated invariants.
  void validate() const;
  /// Hash of every input affecting per-replica results except the seeds.
  std::string hash() const;
};

struct AdvanceResult {
  Point position{};
  bool branched = false;
  double dt = 0.0;
};

/// One thinning step: propose an event after tau ~ Exp(beta v_max), move by
/// an exact Gaussian increment over min(tau, t_remaining), and branch with
/// probability v(new position) / v_max if tau <= t_remaining.
AdvanceResult advance_particle(const Point& pos, Rng& rng, double beta, const Potential& p,
                               double t_remaining);

/// Exact move of a particle outside the support until it either touches the
/// plane tangent to the support (then dt < t_remaining) or t_remaining elapses.
/// No branching is possible along the way. Uses the first-passage law
/// T = d^2 / Z^2 of the coordinate normal to that plane.
AdvanceResult advance_free(const Point& pos, Rng& rng, const Potential& p, double t_remaining);

struct ReplicaRecord {
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> counts;
  std::vector<std::uint64_t> counts_region;
  std::vector<double> psi_scores;
  std::uint64_t branch_events = 0;
  std::uint64_t final_count = 0;
  bool truncated = false;
};

/// Deterministic in (config, seed): particles are processed breadth first and
/// every birth owns the substream (seed, birth index).
ReplicaRecord run_replica(const SimConfig& config, std::uint64_t seed);

/// Per-checkpoint ensemble statistics; merging pools replicas exactly.
class EnsembleReport {
public:
  EnsembleReport() = default;
  EnsembleReport(std::vector<double> checkpoints, std::string config_hash, double beta,
                 Point x0, int dim);

  void add(ReplicaRecord r);
  /// Pooled report; requires identical config hashes and checkpoints.
  static EnsembleReport merge(const EnsembleReport& a, const EnsembleReport& b);

  const std::vector<double>& checkpoints() const { return checkpoints_; }
  const std::vector<ReplicaRecord>& replicas() const { return replicas_; }
  const std::string& config_hash() const { return config_hash_; }
  double beta() const { return beta_; }
  const Point& x0() const { return x0_; }
  int dim() const { return dim_; }
  int merge_count() const { return merge_count_; }
  bool has_scores() const { return has_scores_; }
  std::size_t size() const { return replicas_.size(); }
  std::size_t truncated_count() const;

  /// Exact sum over replicas of n_t^k at checkpoint c, k = 0 .. 4.
  BigCount power_sum(std::size_t c, int k) const { return power_sums_.at(c).at(k); }
  /// Sample mean of n_t^k at checkpoint c.
  double raw_moment(std::size_t c, int k) const;
  /// Counts at checkpoint c across replicas.
  std::vector<double> counts_at(std::size_t c) const;

  nlohmann::json summary() const;
  /// CSV rows (t, replica_id, n_t, n_t_U, psi_score).
  void write_csv(std::ostream& out) const;

private:
  std::vector<double> checkpoints_;
  std::string config_hash_;
  double beta_ = 0.0;
  Point x0_{};
  int dim_ = 3;
  bool has_scores_ = false;
  int merge_count_ = 0;
  std::vector<ReplicaRecord> replicas_;
  std::vector<std::array<BigCount, 5>> power_sums_;
};

/// Runs replicas with seeds base_seed + i and pools them in replica order.
/// Base seeds closer than M apart share replicas.
EnsembleReport run_ensemble(const SimConfig& config);

struct GrowthEstimate {
  double slope = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double half_width() const { return 0.5 * (ci_hi - ci_lo); }
};

/// Least-squares slope of log mean count vs t over checkpoints in [t_lo, t_hi],
/// with a 95% bootstrap interval over replicas.
GrowthEstimate estimate_growth(const EnsembleReport& report, double t_lo, double t_hi,
                               int resamples = 400, std::uint64_t seed = 12345);

struct MartingaleCheck {
  std::vector<double> mean;
  std::vector<double> se;
  /// z-score of each checkpoint mean against psi(x0), the t = 0 value.
  std::vector<double> z_initial;
  /// Largest paired z-score between two checkpoints.
  double flatness = 0.0;
  double psi_x0 = 0.0;
};

/// Statistics of exp(-lambda0 t) sum_i psi(X_i(t)) per checkpoint, restricted
/// to the checkpoint indices `use` when given.
MartingaleCheck martingale_check(const EnsembleReport& report, const GroundState& gs,
                                 std::vector<std::size_t> use = {});

enum class Scaling { None, Exponential };

struct MomentEstimate {
  double mean = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// moments[c][k-1] estimates E n_t^k (times exp(-k lambda0 t) when scaled),
/// k = 1 .. 4, with standard errors and 95% bootstrap intervals.
std::vector<std::vector<MomentEstimate>> empirical_moments(const EnsembleReport& report,
                                                           Scaling scaling, double lambda0 = 0.0,
                                                           int resamples = 200,
                                                           std::uint64_t seed = 6789);

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string content_hash(const std::string& text);

/// Parses the "simulation" block of a config; potential is supplied separately.
SimConfig sim_config_from_json(const nlohmann::json& j, const Potential& p);

} // namespace bbm
