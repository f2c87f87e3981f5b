#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace cpgnn::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 data/validation failure, 2 usage error.
enum ExitCode : int { kOk = 0, kDataFailure = 1, kUsage = 2 };

/// Runs `cpgnn <subcommand> ...`. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

/// SHA-256 of a report's compact JSON with the manifest timestamp removed, so the
/// digest of an upstream report is stable across reruns.
std::string report_digest(const nlohmann::json& report);

/// Copy of a report with the manifest's timestamp block removed, for byte comparisons.
nlohmann::json strip_timestamp(nlohmann::json report);

}  // namespace cpgnn::cli
