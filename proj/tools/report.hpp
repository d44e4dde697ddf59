#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "fdi/continual.hpp"

namespace fdi::report {

/// Creates `dir` if needed and writes `content` to dir/name. Throws ErrorKind::io.
void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& content);

/// {"command":..., "config_hash":..., "metrics":{...}, "seed":...}, keys sorted.
nlohmann::json summary(const std::string& command, std::uint64_t config_hash, std::uint64_t seed,
                       nlohmann::json metrics);

void emit_summary(const std::filesystem::path& dir, const nlohmann::json& summary);
void emit_trace(const std::filesystem::path& dir, const std::string& name, const AsrTrace& trace);

}  // namespace fdi::report
