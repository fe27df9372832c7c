#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dna::cli {

// Runs the `dna` command line. args excludes the program name.
// Returns 0 on success, 1 on a domain error, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dna::cli
