#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lht::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitVerifyFailed = 2,
  kExitRuntime = 3,
};

/// Runs one command line (without the program name), e.g.
/// {"train", "--data", "d", "--out", "o"}. Never throws: usage problems map
/// to kExitUsage, library errors to kExitRuntime with the message on `err`.
///
/// Subcommands: gen-data, train, evaluate, sweep-lambda, verify, rerun.
/// Every command writes all outputs plus manifest.json under --out, which
/// must already exist.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a of a file's bytes, as 16 lowercase hex digits. IoError if
/// unreadable.
std::string file_digest(const std::filesystem::path& path);

}  // namespace lht::cli
