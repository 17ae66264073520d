#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mnn::cli {

// Stable exit codes.
enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,  // verify row failed, or no training seed succeeded
  kBadInput = 2,     // unreadable/invalid file, unknown dataset, bad usage
  kOutOfRange = 3,   // value outside its legal range
  kDiverged = 4,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace mnn::cli
