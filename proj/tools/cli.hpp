#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace travelemb::cli {

/// Runs one command line. Returns 0 on success, 1 on a runtime failure and 2
/// on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace travelemb::cli
