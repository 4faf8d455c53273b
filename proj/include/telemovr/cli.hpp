#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace telemovr::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitIo = 2;

/// Entry point of `telemovr simulate|fit|decode|eval|compare`. Never throws;
/// failures are reported on `err` and mapped to an exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "a..b" (inclusive) or a single integer.
std::vector<long> parse_seed_range(const std::string& text);

}  // namespace telemovr::cli
