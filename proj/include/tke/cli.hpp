#pragma once

// Command-line front end: builds models, runs solves and verification
// suites, and emits JSON summaries plus CSV detail files. No interactive
// mode; consumers are test suites and offline analysis.
//
// Exit codes: 0 success, 1 failed checks or solver divergence, 2 config or
// input errors.

#include <string>
#include <vector>

namespace tke {

int run_command(const std::vector<std::string>& args);

}  // namespace tke
