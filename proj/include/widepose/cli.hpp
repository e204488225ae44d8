#pragma once

#include <iosfwd>

namespace widepose {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitDomainFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `widepose` executable. `--config FILE` splices the
/// keys of a flat JSON object in front of the subcommand's flags, so flags
/// given on the command line take precedence.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace widepose
