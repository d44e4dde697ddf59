#include "report.hpp"

#include <fstream>
#include <system_error>

#include "fdi/util.hpp"

namespace fdi::report {

void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory " + dir.string() + ": " + ec.message());
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

nlohmann::json summary(const std::string& command, std::uint64_t config_hash, std::uint64_t seed,
                       nlohmann::json metrics) {
  return {{"command", command}, {"config_hash", hex64(config_hash)}, {"seed", seed}, {"metrics", std::move(metrics)}};
}

void emit_summary(const std::filesystem::path& dir, const nlohmann::json& s) {
  write_file(dir, "summary.json", s.dump(2) + "\n");
}

void emit_trace(const std::filesystem::path& dir, const std::string& name, const AsrTrace& trace) {
  write_file(dir, name, trace.to_csv());
}

}  // namespace fdi::report
