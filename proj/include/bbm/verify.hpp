#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbm/potential.hpp"

namespace bbm {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  /// Smallest (tolerance - error) / tolerance over the criterion's checks;
  /// negative when some check fails.
  double margin = 0.0;
  double seconds = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

struct VerifyOptions {
  int workers = 1;
  std::uint64_t seed = 20240601;
  int replicas = 10000;
  int nodes = 128;
};

/// Criteria 1 .. 10 on the reference configuration (dim=3 bump a=1, h=1 and
/// its dim=1 analogue). Expensive inputs (ground states, ensembles, PDE runs)
/// are computed once and shared between criteria.
class Verifier {
public:
  explicit Verifier(VerifyOptions opts = {});
  ~Verifier();
  Verifier(const Verifier&) = delete;
  Verifier& operator=(const Verifier&) = delete;

  CriterionResult run(int id);
  std::vector<CriterionResult> run(const std::vector<int>& ids);

  struct Cache;

private:
  VerifyOptions opts_;
  std::unique_ptr<Cache> cache_;
};

/// Criterion ids belonging to a named suite: "super", "sub", "critical" or "all".
std::vector<int> suite_criteria(const std::string& suite);

nlohmann::json to_json(const CriterionResult& r);

/// Oracles independent of the Nystrom machinery.
/// beta_cr of a dim=3 radial potential by shooting u'' = -2 beta v u.
double shooting_beta_critical(const Potential& p);
/// lambda0 for dim=1 sharp indicator of half-width a and height 1:
/// root of k tan(k a) = kappa, k = sqrt(2 (beta - lambda)), kappa = sqrt(2 lambda).
double indicator_lambda0_1d(double beta, double a);
/// Number of set partitions of {1..n} into k blocks, by enumeration.
std::uint64_t count_partitions(int n, int k);

} // namespace bbm
