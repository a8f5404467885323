#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fhm::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kRuntimeError = 3,
  kIoError = 4,
};

// Runs the fhm command line. argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lower-case hex FNV-1a of `text`, used to name output directories.
std::string config_hash(const std::string& text);

}  // namespace fhm::cli
