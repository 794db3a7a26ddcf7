#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ampsynth::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2 };

/// Entry point behind the `ampsynth` binary. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ampsynth::cli
