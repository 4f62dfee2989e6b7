#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fastertucker::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,          // no subcommand, unknown flag, bad flag syntax
  kExitConfig = 2,         // invalid values, parse/validation errors, capacity
  kExitDivergence = 3,
  kExitCountMismatch = 4,
  kExitIo = 5,
};

// Parses "100,200,300", "10000^5", or a single value repeated `order` times.
std::vector<std::uint64_t> parse_extent_list(const std::string& text, std::size_t order);

struct CountRow {
  std::string quantity;
  std::string plan;
  std::uint64_t formula = 0;
  std::uint64_t measured = 0;
};

// Writes the rows as CSV; returns kExitCountMismatch if any row disagrees.
int report_counts(std::ostream& out, const std::vector<CountRow>& rows);

// Runs one invocation. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fastertucker::cli
