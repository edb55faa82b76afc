#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace splatalign::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kBadInput = 3 };

/// Runs one invocation of the command-line tool; args exclude argv[0].
int run(const std::vector<std::string>& args);

std::string sha256_hex(std::string_view bytes);

/// Parses a payload manifest ("<sha256>  <relative path>" per line).
std::vector<std::pair<std::string, std::string>> read_manifest(const std::filesystem::path& path);

}  // namespace splatalign::cli
