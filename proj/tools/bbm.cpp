#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bbm/errors.hpp"
#include "bbm/moments.hpp"
#include "bbm/pde.hpp"
#include "bbm/potential.hpp"
#include "bbm/quadrature.hpp"
#include "bbm/sim.hpp"
#include "bbm/spectral.hpp"
#include "bbm/verify.hpp"

#ifndef BBM_VERSION
#define BBM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kValidation = 2;
constexpr int kNumerical = 3;
constexpr int kVerification = 4;

struct Globals {
  std::string config_path;
  int nodes = 0;
  std::int64_t seed = -1;
  int workers = 1;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw bbm::ValidationError("cannot read config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw bbm::ValidationError("config '" + path + "': " + e.what());
  }
}

json reference_potential() { return {{"dim", 3}, {"shape", "bump"}, {"radius", 1.0}, {"height", 1.0}}; }

struct Setup {
  json config;
  bbm::Potential potential;
  bbm::QuadGrid grid;
};

Setup setup(const Globals& g) {
  json config = load_config(g.config_path);
  if (!config.is_object()) throw bbm::ValidationError("config must be a JSON object");
  if (!config.contains("potential")) config["potential"] = reference_potential();
  if (g.nodes > 0) config["nodes"] = g.nodes;
  if (!config.contains("nodes")) config["nodes"] = 128;
  auto p = bbm::potential_from_json(config.at("potential"));
  auto grid = bbm::build_grid(p, config.at("nodes").get<int>());
  return {config, std::move(p), std::move(grid)};
}

// --seed, then the config's own seed, then $BBM_SEED, then `fallback`
std::uint64_t resolve_seed(const Globals& g, const json& sim, std::uint64_t fallback = 1) {
  if (g.seed >= 0) return static_cast<std::uint64_t>(g.seed);
  if (sim.contains("seed")) return sim.at("seed").get<std::uint64_t>();
  if (const char* env = std::getenv("BBM_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw bbm::ValidationError("BBM_SEED must be a nonnegative integer");
    }
  }
  return fallback;
}

class Manifest {
public:
  Manifest(std::string command, std::vector<std::string> argv)
      : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["argv"] = std::move(argv);
    j_["version"] = BBM_VERSION;
    const std::time_t now = std::time(nullptr);
    std::ostringstream os;
    os << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    j_["started_at"] = os.str();
    j_["outputs"] = json::array();
    j_["seeds"] = json::array();
  }
  void config(const json& c, const std::string& hash) {
    j_["config"] = c;
    j_["config_hash"] = hash;
  }
  void seeds(const json& s) { j_["seeds"] = s; }
  void output(const std::string& path) { j_["outputs"].push_back(path); }
  void write(const std::string& path) {
    output(path);
    j_["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream out(path);
    out << j_.dump(2) << '\n';
  }

private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

std::ofstream open_out(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw bbm::ValidationError("cannot write '" + path + "'");
  return out;
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

int cmd_betacr(const Globals& g) {
  auto s = setup(g);
  json out{{"dim", s.potential.dim()}, {"nodes", s.grid.nodes.size()}, {"panels", s.grid.panels.size()}};
  if (s.potential.dim() == 1) {
    out["beta_cr"] = 0.0;
  } else {
    const auto op = bbm::assemble_K(0.0, 1.0, s.potential, s.grid, true);
    const auto eig = bbm::principal_eigen(op);
    out["beta_cr"] = 1.0 / eig.mu;
    out["iterations"] = eig.iterations;
    out["residual"] = eig.residual;
    out["gap_ratio"] = eig.gap_ratio;
    out["refinement_change"] = op.refinement_change.value_or(0.0);
  }
  print(out);
  return 0;
}

int cmd_lambda0(const Globals& g, double beta) {
  auto s = setup(g);
  print({{"beta", beta}, {"lambda0", bbm::lambda0(beta, s.potential, s.grid)},
         {"beta_cr", bbm::beta_critical(s.potential, s.grid)}});
  return 0;
}

int cmd_groundstate(const Globals& g, const std::vector<std::string>& argv, double beta,
                    const std::string& out_path, bool critical, double extent, int points) {
  auto s = setup(g);
  Manifest m("groundstate", argv);
  const auto gs = bbm::ground_state(beta, s.potential, s.grid,
                                    critical ? bbm::Normalization::Critical : bbm::Normalization::L2);
  const double lo = s.potential.dim() == 3 ? 0.0 : -extent;
  {
    auto out = open_out(out_path);
    out << "x,psi\n" << std::setprecision(17);
    for (int i = 0; i < points; ++i) {
      const double x = lo + (extent - lo) * i / (points - 1);
      out << x << ',' << gs(x) << '\n';
    }
  }
  json echo = s.config;
  echo["beta"] = beta;
  echo["normalization"] = critical ? "critical" : "l2";
  echo["extent"] = extent;
  echo["points"] = points;
  m.config(echo, bbm::content_hash(echo.dump()));
  m.output(out_path);
  m.write(out_path + ".manifest.json");
  print({{"beta", beta}, {"lambda0", gs.lambda0()}, {"mass", gs.mass()}, {"psi_x0", gs(0.0)},
         {"fixed_point_residual", gs.fixed_point_residual()}, {"out", out_path}});
  return 0;
}

int cmd_moments(const Globals& g, const std::vector<std::string>& argv, const std::string& regime,
                double beta, int order, const std::vector<double>& xs, const std::string& out_path) {
  auto s = setup(g);
  bbm::MomentTable t;
  if (regime == "super") {
    t = bbm::supercritical_f(beta, order, xs, s.potential, s.grid);
  } else if (regime == "sub") {
    t = bbm::subcritical_f(beta, order, xs, s.potential, s.grid);
  } else {
    throw bbm::ValidationError("--regime must be super or sub");
  }
  std::ostringstream csv;
  csv << "n,x,f_n,moment\n" << std::setprecision(17);
  for (double x : xs) {
    const auto moments = regime == "super" ? bbm::xi_moments(t, x, order) : bbm::limit_moments_sub(t, x, order);
    const auto j = t.index_of(x);
    for (int n = 1; n <= order; ++n) csv << n << ',' << x << ',' << t.f[n - 1][j] << ',' << moments[n - 1] << '\n';
  }
  if (out_path.empty()) {
    std::cout << csv.str();
    return 0;
  }
  Manifest m("moments", argv);
  open_out(out_path) << csv.str();
  json echo = s.config;
  echo["regime"] = regime;
  echo["beta"] = beta;
  echo["order"] = order;
  echo["x"] = xs;
  m.config(echo, bbm::content_hash(echo.dump()));
  m.output(out_path);
  m.write(out_path + ".manifest.json");
  return 0;
}

int cmd_simulate(const Globals& g, const std::vector<std::string>& argv, const std::string& dir) {
  auto s = setup(g);
  if (!s.config.contains("simulation")) throw bbm::ValidationError("config has no \"simulation\" block");
  json sim = s.config.at("simulation");
  sim["seed"] = resolve_seed(g, sim);
  if (g.workers > 0) sim["workers"] = g.workers;
  auto cfg = bbm::sim_config_from_json(sim, s.potential);
  // psi scores whenever a ground state exists
  const double bc = bbm::beta_critical(s.potential, s.grid);
  if (cfg.beta > bc && cfg.beta > 0.0) {
    const auto gs = bbm::ground_state(cfg.beta, s.potential, s.grid, bbm::Normalization::L2);
    cfg.psi = std::make_shared<const bbm::ProfileTable>(gs.table());
  }
  Manifest m("simulate", argv);
  const auto report = bbm::run_ensemble(cfg);
  fs::create_directories(dir);
  const std::string csv = (fs::path(dir) / "counts.csv").string();
  const std::string summary = (fs::path(dir) / "summary.json").string();
  {
    auto out = open_out(csv);
    report.write_csv(out);
  }
  open_out(summary) << report.summary().dump(2) << '\n';
  json echo = s.config;
  echo["simulation"] = sim;
  echo["simulation"].erase("workers");
  m.config(echo, cfg.hash());
  m.seeds({{"base_seed", cfg.base_seed}, {"replica_seeds", "base_seed + i, i = 0 .. replicas-1"}});
  m.output(csv);
  m.output(summary);
  m.write((fs::path(dir) / "manifest.json").string());
  print({{"replicas", report.size()}, {"truncated", report.truncated_count()},
         {"mean_final", report.raw_moment(report.checkpoints().size() - 1, 1)}, {"out", dir}});
  return 0;
}

int cmd_oracle(const Globals& g, const std::vector<std::string>& argv, const std::string& out_path) {
  auto s = setup(g);
  if (!s.config.contains("pde")) throw bbm::ValidationError("config has no \"pde\" block");
  const auto pb = bbm::pde_problem_from_json(s.config.at("pde"), s.potential);
  const auto sol = bbm::solve_rho_bar(pb);
  json res{{"probe", pb.probe}, {"t_end", sol.step_times.back()}, {"min_rho_bar_1", sol.min_value}};
  std::vector<double> finals;
  for (const auto& series : sol.probe) finals.push_back(series.back());
  res["rho_bar_at_probe"] = finals;
  res["raw_moments_at_probe"] = bbm::raw_count_moments(finals, static_cast<int>(finals.size()));
  res["sup_rho_bar_1"] = sol.sup_series.back();
  if (!out_path.empty()) {
    Manifest m("oracle", argv);
    {
      auto out = open_out(out_path);
      bbm::write_rho_bar_csv(sol, out);
    }
    m.config(s.config, bbm::content_hash(s.config.dump()));
    m.output(out_path);
    m.write(out_path + ".manifest.json");
    res["out"] = out_path;
  }
  print(res);
  return 0;
}

int cmd_verify(const Globals& g, const std::vector<std::string>& argv, const std::string& suite,
               const std::string& out_path, int replicas) {
  bbm::VerifyOptions opts;
  opts.seed = resolve_seed(g, json::object(), opts.seed);
  opts.workers = std::max(1, g.workers);
  opts.replicas = replicas;
  if (g.nodes > 0) opts.nodes = g.nodes;
  const auto ids = bbm::suite_criteria(suite);
  Manifest m("verify", argv);
  bbm::Verifier v(opts);
  json report{{"suite", suite}, {"criteria", json::array()}};
  bool all = true;
  for (int id : ids) {
    const auto r = v.run(id);
    all = all && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.name << " (margin "
              << r.margin << ")" << std::endl;
    report["criteria"].push_back(bbm::to_json(r));
  }
  report["pass"] = all;
  if (!out_path.empty()) {
    open_out(out_path) << report.dump(2) << '\n';
    json echo{{"suite", suite}, {"replicas", opts.replicas}, {"nodes", opts.nodes}};
    m.config(echo, bbm::content_hash(echo.dump()));
    m.seeds({{"base_seed", opts.seed}});
    m.output(out_path);
    m.write(out_path + ".manifest.json");
  }
  return all ? 0 : kVerification;
}

} // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Branching Brownian motion in a compact potential: spectra, moments, simulation"};
  app.set_version_flag("--version", BBM_VERSION);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config (potential, nodes, simulation, pde)");
  app.add_option("--nodes", g.nodes, "quadrature nodes (overrides config)")->check(CLI::Range(16, 4096));
  app.add_option("--seed", g.seed, "base seed (default: config, then $BBM_SEED, then 1)")->check(CLI::NonNegativeNumber);
  app.add_option("--workers", g.workers, "worker threads; results do not depend on it")->check(CLI::Range(1, 1024));

  auto* betacr = app.add_subcommand("betacr", "critical intensity and grid diagnostics");
  double beta = 0.0;
  auto* l0 = app.add_subcommand("lambda0", "growth exponent for a given beta");
  l0->add_option("--beta", beta, "branching intensity")->required();

  auto* gs = app.add_subcommand("groundstate", "ground state profile as CSV (x, psi)");
  std::string out;
  bool critical = false;
  double extent = 5.0;
  int points = 201;
  gs->add_option("--beta", beta, "branching intensity")->required();
  gs->add_option("--out", out, "CSV path")->required();
  gs->add_flag("--critical", critical, "critical normalization (dim=3, beta = beta_cr)");
  gs->add_option("--extent", extent, "largest |x| written")->check(CLI::PositiveNumber);
  gs->add_option("--points", points, "rows written")->check(CLI::Range(2, 1000000));

  auto* mom = app.add_subcommand("moments", "limit-variable moments f_n as CSV (n, x, f_n, moment)");
  std::string regime;
  int order = 2;
  std::vector<double> xs{0.0};
  mom->add_option("--regime", regime, "super | sub")->required()->check(CLI::IsMember({"super", "sub"}));
  mom->add_option("--beta", beta, "branching intensity")->required();
  mom->add_option("--order", order, "highest order N")->check(CLI::Range(1, 12));
  mom->add_option("--x", xs, "evaluation points (scalar coordinate)")->delimiter(',');
  mom->add_option("--out", out, "CSV path (default: stdout)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo ensemble");
  std::string dir;
  sim->add_option("--out", dir, "output directory")->required();

  auto* oracle = app.add_subcommand("oracle", "Crank-Nicolson moment hierarchy");
  oracle->add_option("--out", out, "CSV path (t, x, n, rho_bar)");

  auto* ver = app.add_subcommand("verify", "acceptance criteria on the reference configuration");
  std::string suite = "all";
  int replicas = 10000;
  ver->add_option("--suite", suite, "super | sub | critical | all")
      ->check(CLI::IsMember({"super", "sub", "critical", "all"}));
  ver->add_option("--out", out, "JSON report path");
  ver->add_option("--replicas", replicas, "Monte Carlo replicas")->check(CLI::Range(100, 10000000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  try {
    if (*betacr) return cmd_betacr(g);
    if (*l0) return cmd_lambda0(g, beta);
    if (*gs) return cmd_groundstate(g, args, beta, out, critical, extent, points);
    if (*mom) return cmd_moments(g, args, regime, beta, order, xs, out);
    if (*sim) return cmd_simulate(g, args, dir);
    if (*oracle) return cmd_oracle(g, args, out);
    if (*ver) return cmd_verify(g, args, suite, out, replicas);
  } catch (const bbm::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const bbm::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const bbm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kValidation;
}
