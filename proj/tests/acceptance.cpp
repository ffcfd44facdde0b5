// Runs the ten acceptance criteria on the reference configuration.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <thread>

#include "bbm/verify.hpp"

int main(int argc, char** argv) {
  bbm::VerifyOptions opts;
  opts.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* s = std::getenv("BBM_SEED")) opts.seed = std::stoull(s);
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::stoi(argv[i]));
  if (ids.empty()) ids = bbm::suite_criteria("all");

  bbm::Verifier verifier(opts);
  int failed = 0;
  for (int id : ids) {
    const auto r = verifier.run(id);
    std::printf("[%s] criterion %2d: %-40s margin=%+.3f (%.1fs)\n", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.margin, r.seconds);
    if (!r.pass) {
      ++failed;
      std::printf("%s\n", r.details.dump(2).c_str());
    }
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
