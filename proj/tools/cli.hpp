#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rbsos::cli {

enum ExitCode : int { ok = 0, parse_error = 2, indeterminate = 3, hypothesis_failure = 4 };

// argv[0] is the program name. Text or JSON goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& bytes);

}  // namespace rbsos::cli
