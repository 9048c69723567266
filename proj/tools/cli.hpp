#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "refinery/proposal.hpp"

namespace refinery::cli {

enum ExitCode : int { ok = 0, unsatisfied = 1, usage = 2, runtime = 3 };

// The refinery command line. `transport` replaces the HTTP client (tests).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, TransportFactory transport = {});

// Cold-start subspace and assignment prompts for an instance, as `describe` prints them.
std::string describe_text(const std::string& instance_path);

}  // namespace refinery::cli
