#include "bbm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "bbm/errors.hpp"
#include "bbm/stats.hpp"

namespace bbm {

namespace {

// Marsaglia polar method without caching, so every draw is a pure function
// of the generator state.
double normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * rng.uniform() - 1.0;
    const double v = 2.0 * rng.uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

double exponential(Rng& rng, double rate) { return -std::log(rng.uniform()) / rate; }

void gaussian_step(Point& x, Rng& rng, double variance, int dim) {
  const double sd = std::sqrt(variance);
  for (int i = 0; i < dim; ++i) x[i] += sd * normal(rng);
}

// Distance from x to the plane (dim=3) or endpoint (dim=1) bounding the
// support on x's side; nonpositive when x may touch the support.
double exterior_distance(const Point& x, const Potential& p) {
  if (p.dim() == 1) {
    if (x[0] > p.support_hi()) return x[0] - p.support_hi();
    if (x[0] < p.support_lo()) return p.support_lo() - x[0];
    return 0.0;
  }
  return norm(x, 3) - p.support_hi();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

BigCount ipow(std::uint64_t n, int k) {
  BigCount r = 1;
  for (int i = 0; i < k; ++i) r *= n;
  return r;
}

} // namespace

bool CountRegion::contains(const Point& x, int dim) const {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += (x[i] - center[i]) * (x[i] - center[i]);
  return s <= radius * radius;
}

void SimConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("simulation: beta must be >= 0");
  if (!(t_end > 0.0)) throw ValidationError("simulation: t_end must be positive");
  if (replicas < 1) throw ValidationError("simulation: replicas must be >= 1");
  if (workers < 1) throw ValidationError("simulation: workers must be >= 1");
  if (max_particles < 1) throw ValidationError("simulation: max_particles must be >= 1");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (!(checkpoints[i] > 0.0 && checkpoints[i] <= t_end))
      throw ValidationError("simulation: checkpoints must lie in (0, t_end]");
    if (i > 0 && !(checkpoints[i] > checkpoints[i - 1]))
      throw ValidationError("simulation: checkpoints must be strictly increasing");
  }
  if (count_region && !(count_region->radius > 0.0))
    throw ValidationError("simulation: count region radius must be positive");
  if (constant_field && !(*constant_field > 0.0))
    throw ValidationError("simulation: constant field must be positive");
  for (int i = 0; i < dim(); ++i)
    if (!std::isfinite(x0[i])) throw ValidationError("simulation: x0 must be finite");
}

std::string SimConfig::hash() const {
  nlohmann::json j;
  j["potential"] = potential_to_json(potential);
  j["beta"] = beta;
  j["x0"] = std::vector<double>(x0.begin(), x0.begin() + dim());
  j["t_end"] = t_end;
  j["checkpoints"] = checkpoints;
  j["max_particles"] = max_particles;
  if (count_region) {
    j["region_center"] = std::vector<double>(count_region->center.begin(), count_region->center.end());
    j["region_radius"] = count_region->radius;
  }
  if (constant_field) j["constant_field"] = *constant_field;
  j["psi_scores"] = static_cast<bool>(psi);
  return content_hash(j.dump());
}

std::string content_hash(const std::string& text) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(text);
  return os.str();
}

AdvanceResult advance_particle(const Point& pos, Rng& rng, double beta, const Potential& p,
                               double t_remaining) {
  AdvanceResult r;
  r.position = pos;
  const double rate = beta * p.v_max();
  if (!(rate > 0.0)) {
    gaussian_step(r.position, rng, t_remaining, p.dim());
    r.dt = t_remaining;
    return r;
  }
  const double tau = exponential(rng, rate);
  r.dt = std::min(tau, t_remaining);
  gaussian_step(r.position, rng, r.dt, p.dim());
  if (tau <= t_remaining) r.branched = rng.uniform() * p.v_max() < p(r.position);
  return r;
}

AdvanceResult advance_free(const Point& pos, Rng& rng, const Potential& p, double t_remaining) {
  const int dim = p.dim();
  const double d = exterior_distance(pos, p);
  if (!(d > 0.0)) throw DomainError("advance_free: particle is not outside the support");

  // unit normal pointing away from the support
  Point u{};
  if (dim == 1) {
    u[0] = pos[0] > p.support_hi() ? 1.0 : -1.0;
  } else {
    const double r = norm(pos, 3);
    for (int i = 0; i < 3; ++i) u[i] = pos[i] / r;
  }
  const double z = normal(rng);
  const double hit = z == 0.0 ? std::numeric_limits<double>::infinity() : (d / z) * (d / z);

  AdvanceResult out;
  double along = 0.0;
  if (hit < t_remaining) {
    out.dt = hit;
    along = -d;
  } else {
    out.dt = t_remaining;
    // normal displacement conditioned on staying above -d (reflection principle)
    const double sd = std::sqrt(t_remaining);
    for (;;) {
      along = sd * normal(rng);
      if (along <= -d) continue;
      if (rng.uniform() < -std::expm1(-2.0 * d * (d + along) / t_remaining)) break;
    }
  }
  out.position = pos;
  if (dim == 3) {
    Point g{};
    gaussian_step(g, rng, out.dt, 3);
    const double gu = g[0] * u[0] + g[1] * u[1] + g[2] * u[2];
    for (int i = 0; i < 3; ++i) out.position[i] += g[i] - gu * u[i] + along * u[i];
  } else {
    out.position[0] += along * u[0];
  }
  return out;
}

ReplicaRecord run_replica(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  const auto& cps = config.checkpoints;
  const std::size_t ncp = cps.size();
  const int dim = config.dim();
  const Potential& p = config.potential;
  const bool constant = config.constant_field.has_value();
  const double rate = constant ? config.beta * *config.constant_field : config.beta * p.v_max();
  const double margin = 0.25 * (p.dim() == 1 ? p.support_hi() - p.support_lo() : p.support_hi());

  ReplicaRecord rec;
  rec.seed = seed;
  rec.counts.assign(ncp, 0);
  rec.counts_region.assign(ncp, 0);
  rec.psi_scores.assign(ncp, 0.0);

  struct Item {
    Point pos;
    double t;
    std::uint64_t stream;
  };
  std::deque<Item> queue;
  queue.push_back({config.x0, 0.0, 0});
  std::uint64_t population = 1;

  while (!queue.empty()) {
    const Item item = queue.front();
    queue.pop_front();
    Rng rng(seed, item.stream);
    Point x = item.pos;
    double t = item.t;
    auto next = static_cast<std::size_t>(std::lower_bound(cps.begin(), cps.end(), t) - cps.begin());

    while (t < config.t_end) {
      const double stop = next < ncp ? cps[next] : config.t_end;
      const double remaining = stop - t;
      bool branched = false;
      double dt = remaining;
      if (remaining > 0.0) {
        if (!(rate > 0.0)) {
          gaussian_step(x, rng, remaining, dim);
        } else if (!constant && exterior_distance(x, p) > margin) {
          const AdvanceResult step = advance_free(x, rng, p, remaining);
          x = step.position;
          dt = step.dt;
        } else if (constant) {
          const double tau = exponential(rng, rate);
          dt = std::min(tau, remaining);
          gaussian_step(x, rng, dt, dim);
          branched = tau <= remaining;
        } else {
          const AdvanceResult step = advance_particle(x, rng, config.beta, p, remaining);
          x = step.position;
          dt = step.dt;
          branched = step.branched;
        }
      }
      if (dt >= remaining) {
        t = stop;
      } else {
        t += dt;
      }
      if (branched) {
        if (population >= config.max_particles) {
          rec.truncated = true;
          queue.clear();
          break;
        }
        ++population;
        ++rec.branch_events;
        queue.push_back({x, t, population - 1});
      }
      if (t == stop && next < ncp) {
        rec.counts[next] += 1;
        if (!config.count_region || config.count_region->contains(x, dim)) rec.counts_region[next] += 1;
        if (config.psi) rec.psi_scores[next] += (*config.psi)(x);
        ++next;
      }
    }
    if (rec.truncated) break;
  }
  rec.final_count = population;
  return rec;
}

EnsembleReport::EnsembleReport(std::vector<double> checkpoints, std::string config_hash, double beta,
                               Point x0, int dim)
    : checkpoints_(std::move(checkpoints)), config_hash_(std::move(config_hash)), beta_(beta),
      x0_(x0), dim_(dim), power_sums_(checkpoints_.size()) {
  for (auto& row : power_sums_) row.fill(0);
}

void EnsembleReport::add(ReplicaRecord r) {
  if (r.counts.size() != checkpoints_.size())
    throw ValidationError("EnsembleReport: replica checkpoint count mismatch");
  for (std::size_t c = 0; c < checkpoints_.size(); ++c)
    for (int k = 0; k <= 4; ++k) power_sums_[c][k] += ipow(r.counts[c], k);
  if (replicas_.empty()) {
    has_scores_ = std::any_of(r.psi_scores.begin(), r.psi_scores.end(), [](double s) { return s != 0.0; });
  } else if (!has_scores_) {
    has_scores_ = std::any_of(r.psi_scores.begin(), r.psi_scores.end(), [](double s) { return s != 0.0; });
  }
  replicas_.push_back(std::move(r));
}

EnsembleReport EnsembleReport::merge(const EnsembleReport& a, const EnsembleReport& b) {
  if (a.config_hash_ != b.config_hash_ || a.checkpoints_ != b.checkpoints_)
    throw ValidationError("EnsembleReport::merge: reports come from different configurations");
  EnsembleReport out = a;
  for (const auto& r : b.replicas_) out.add(r);
  out.merge_count_ = a.merge_count_ + b.merge_count_ + 1;
  return out;
}

std::size_t EnsembleReport::truncated_count() const {
  return static_cast<std::size_t>(
      std::count_if(replicas_.begin(), replicas_.end(), [](const ReplicaRecord& r) { return r.truncated; }));
}

double EnsembleReport::raw_moment(std::size_t c, int k) const {
  return static_cast<double>(power_sums_.at(c).at(k)) / static_cast<double>(replicas_.size());
}

std::vector<double> EnsembleReport::counts_at(std::size_t c) const {
  std::vector<double> out(replicas_.size());
  for (std::size_t i = 0; i < replicas_.size(); ++i) out[i] = static_cast<double>(replicas_[i].counts[c]);
  return out;
}

nlohmann::json EnsembleReport::summary() const {
  nlohmann::json j;
  j["config_hash"] = config_hash_;
  j["replicas"] = replicas_.size();
  j["merge_count"] = merge_count_;
  j["truncated_replicas"] = truncated_count();
  std::vector<std::uint64_t> seeds;
  for (const auto& r : replicas_) seeds.push_back(r.seed);
  j["seeds"] = seeds;
  auto& cps = j["checkpoints"];
  cps = nlohmann::json::array();
  for (std::size_t c = 0; c < checkpoints_.size(); ++c) {
    nlohmann::json e;
    e["t"] = checkpoints_[c];
    for (int k = 1; k <= 4; ++k) {
      e["power_sum_" + std::to_string(k)] = to_string(power_sums_[c][k]);
      e["raw_moment_" + std::to_string(k)] = raw_moment(c, k);
    }
    cps.push_back(e);
  }
  return j;
}

void EnsembleReport::write_csv(std::ostream& out) const {
  out << "t,replica_id,n_t,n_t_U,psi_score\n";
  out << std::setprecision(17);
  for (std::size_t c = 0; c < checkpoints_.size(); ++c)
    for (std::size_t i = 0; i < replicas_.size(); ++i) {
      const auto& r = replicas_[i];
      out << checkpoints_[c] << ',' << i << ',' << r.counts[c] << ',' << r.counts_region[c] << ','
          << r.psi_scores[c] << '\n';
    }
}

EnsembleReport run_ensemble(const SimConfig& config) {
  config.validate();
  const auto m = static_cast<std::size_t>(config.replicas);
  std::vector<ReplicaRecord> records(m);
  const auto work = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t i = worker; i < m; i += stride) records[i] = run_replica(config, config.base_seed + i);
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), m);
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& th : pool) th.join();
  }
  EnsembleReport report(config.checkpoints, config.hash(), config.beta, config.x0, config.dim());
  for (auto& r : records) report.add(std::move(r));
  return report;
}

GrowthEstimate estimate_growth(const EnsembleReport& report, double t_lo, double t_hi, int resamples,
                               std::uint64_t seed) {
  std::vector<std::size_t> window;
  for (std::size_t c = 0; c < report.checkpoints().size(); ++c)
    if (report.checkpoints()[c] >= t_lo && report.checkpoints()[c] <= t_hi) window.push_back(c);
  if (window.size() < 4) throw ValidationError("estimate_growth: need at least 4 checkpoints in the window");

  const auto& reps = report.replicas();
  const std::size_t m = reps.size();
  const auto slope_for = [&](const std::vector<std::size_t>& pick) {
    std::vector<double> ts;
    std::vector<double> logs;
    for (std::size_t c : window) {
      double s = 0.0;
      for (std::size_t i : pick) s += static_cast<double>(reps[i].counts[c]);
      const double mean_count = s / static_cast<double>(pick.size());
      if (!(mean_count > 0.0)) throw DomainError("estimate_growth: nonpositive mean count");
      ts.push_back(report.checkpoints()[c]);
      logs.push_back(std::log(mean_count));
    }
    return linear_fit(ts, logs).slope;
  };

  std::vector<std::size_t> all(m);
  for (std::size_t i = 0; i < m; ++i) all[i] = i;
  GrowthEstimate est;
  est.slope = slope_for(all);
  Rng rng(seed);
  std::vector<double> boot;
  std::vector<std::size_t> pick(m);
  for (int b = 0; b < resamples; ++b) {
    for (auto& i : pick) i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(m));
    boot.push_back(slope_for(pick));
  }
  est.ci_lo = quantile(boot, 0.025);
  est.ci_hi = quantile(boot, 0.975);
  return est;
}

MartingaleCheck martingale_check(const EnsembleReport& report, const GroundState& gs,
                                 std::vector<std::size_t> use) {
  if (report.beta() == 0.0) throw ValidationError("martingale_check: beta = 0 has no growth exponent");
  if (gs.normalization() != Normalization::L2)
    throw ValidationError("martingale_check: needs a supercritical ground state");
  if (!report.has_scores()) throw ValidationError("martingale_check: report carries no psi scores");

  const auto& all = report.checkpoints();
  if (use.empty())
    for (std::size_t c = 0; c < all.size(); ++c) use.push_back(c);
  std::vector<double> cps;
  for (std::size_t c : use) cps.push_back(all.at(c));
  const auto& reps = report.replicas();
  std::vector<std::vector<double>> scaled(cps.size(), std::vector<double>(reps.size()));
  MartingaleCheck out;
  out.psi_x0 = gs(report.x0());
  for (std::size_t c = 0; c < cps.size(); ++c) {
    const double factor = std::exp(-gs.lambda0() * cps[c]);
    for (std::size_t i = 0; i < reps.size(); ++i) scaled[c][i] = factor * reps[i].psi_scores[use[c]];
    out.mean.push_back(mean(scaled[c]));
    out.se.push_back(standard_error(scaled[c]));
    out.z_initial.push_back(std::abs(out.mean.back() - out.psi_x0) / out.se.back());
  }
  for (std::size_t a = 0; a < cps.size(); ++a)
    for (std::size_t b = a + 1; b < cps.size(); ++b) {
      std::vector<double> d(reps.size());
      for (std::size_t i = 0; i < reps.size(); ++i) d[i] = scaled[a][i] - scaled[b][i];
      const double se = standard_error(d);
      if (se > 0.0) out.flatness = std::max(out.flatness, std::abs(mean(d)) / se);
    }
  return out;
}

std::vector<std::vector<MomentEstimate>> empirical_moments(const EnsembleReport& report, Scaling scaling,
                                                           double lambda0, int resamples,
                                                           std::uint64_t seed) {
  const auto& cps = report.checkpoints();
  const auto& reps = report.replicas();
  const std::size_t m = reps.size();
  std::vector<std::vector<MomentEstimate>> out(cps.size());
  Rng rng(seed);
  std::vector<double> x(m);
  std::vector<double> boot(resamples);
  for (std::size_t c = 0; c < cps.size(); ++c) {
    for (int k = 1; k <= 4; ++k) {
      const double factor = scaling == Scaling::Exponential ? std::exp(-k * lambda0 * cps[c]) : 1.0;
      for (std::size_t i = 0; i < m; ++i) x[i] = std::pow(static_cast<double>(reps[i].counts[c]), k) * factor;
      MomentEstimate e;
      e.mean = report.raw_moment(c, k) * factor;
      e.se = standard_error(x);
      for (int b = 0; b < resamples; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += x[static_cast<std::size_t>(rng.uniform() * static_cast<double>(m))];
        boot[b] = s / static_cast<double>(m);
      }
      e.ci_lo = resamples > 0 ? quantile(boot, 0.025) : e.mean;
      e.ci_hi = resamples > 0 ? quantile(boot, 0.975) : e.mean;
      out[c].push_back(e);
    }
  }
  return out;
}

SimConfig sim_config_from_json(const nlohmann::json& j, const Potential& p) {
  SimConfig c(p);
  try {
    c.beta = j.at("beta").get<double>();
    c.t_end = j.at("t_end").get<double>();
    c.checkpoints = j.value("checkpoints", std::vector<double>{c.t_end});
    c.replicas = j.value("replicas", 1);
    c.base_seed = j.value("seed", std::uint64_t{1});
    c.max_particles = j.value("max_particles", std::size_t{1'000'000});
    c.workers = j.value("workers", 1);
    if (j.contains("x0")) {
      const auto x0 = j.at("x0").get<std::vector<double>>();
      if (x0.size() != static_cast<std::size_t>(p.dim()))
        throw ValidationError("simulation: x0 must have dim coordinates");
      std::copy(x0.begin(), x0.end(), c.x0.begin());
    }
    if (j.contains("count_region")) {
      CountRegion region;
      const auto& r = j.at("count_region");
      const auto center = r.value("center", std::vector<double>(p.dim(), 0.0));
      if (center.size() != static_cast<std::size_t>(p.dim()))
        throw ValidationError("simulation: count_region center must have dim coordinates");
      std::copy(center.begin(), center.end(), region.center.begin());
      region.radius = r.at("radius").get<double>();
      c.count_region = region;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("simulation: ") + e.what());
  }
  c.validate();
  return c;
}

} // namespace bbm
