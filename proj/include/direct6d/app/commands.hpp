#pragma once

// Command-line front end. Exit codes: 0 success, 2 parse / IO / schema
// errors, 3 non-convergence or solver failure, 4 unmatched stems in eval.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace direct6d::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNoConvergence = 3;
inline constexpr int kExitUnmatched = 4;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

struct BenchReport {
  int trials = 0;
  double decode_project_median_us = 0.0;  // decode_pose + project of 8 corners
  double fit_median_ms = 0.0;             // noiseless fit from a 10 deg / 10 cm init
  double fit_converged_fraction = 0.0;
};

// Deterministic scenes from `seed`; times each stage `trials` times.
BenchReport run_bench(int trials, std::uint64_t seed = 0);

}  // namespace direct6d::app
