#pragma once

#include <optional>
#include <string>
#include <vector>

namespace hencky::cli {

enum Exit : int { kOk = 0, kAssertion = 1, kUsage = 2, kRuntime = 3 };

struct RunSpec {
  std::string command;
  std::string scenario;      // path to a scenario file
  std::vector<int> levels;   // mesh resolutions m; empty takes the file's m
  std::string out = "out";
  unsigned seed = 0;
  std::optional<double> tol;  // overrides [solver] tol
  std::string oracle;         // oracle name
  std::vector<int> schedule;  // overrides [pipeline] schedule
  bool quiet = false;

  /// Throws std::invalid_argument when files are missing or levels are bad.
  void check() const;
};

int cmd_mesh_gen(const RunSpec& spec);
int cmd_solve(const RunSpec& spec);
int cmd_recover(const RunSpec& spec);
int cmd_gamma_check(const RunSpec& spec);
int cmd_oracle(const RunSpec& spec);
int cmd_selftest(const RunSpec& spec);

/// Dispatch on spec.command; maps exceptions to exit codes and prints them to stderr.
int run(const RunSpec& spec);

}  // namespace hencky::cli
