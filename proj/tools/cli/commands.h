#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace cautious::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitNoCertificate = 4,
};

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<double> tol;
  // reproduce only: linear | contraction | uav
  std::string example;
};

// Runs a subcommand (bound, certify, contract, regulate, online, reproduce)
// and returns its exit code. Progress and reports go to `log`, errors to
// `err`; nothing throws.
int Dispatch(const std::string& command, const Flags& flags, std::ostream& log,
             std::ostream& err);

}  // namespace cautious::cli
