#pragma once

// Configuration, experiment dispatch and artifact serialization behind the `thinfb` tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "thinfb/lattice.hpp"

namespace thinfb {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

/// eval-u, check-barrier, domain-variation, solve-fb, solve-linear, flatness, verify-all.
const std::vector<std::string>& subcommands();

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Validates `raw` against the schema and fills defaults for the sections the subcommand reads.
/// `seed` overrides the config's seed. Throws ConfigError with the JSON key path of the first violation.
nlohmann::ordered_json normalize_config(const std::string& subcommand, const nlohmann::json& raw,
                                        std::optional<std::uint64_t> seed = std::nullopt);

struct RunOutcome {
  int exit_code = 0;  // 0 all certificates pass, 1 a certificate failed or a run error, 2 configuration error
  std::string message;
  nlohmann::ordered_json summary;  // {certificates: [{id, pass, margin}], constants: {...}}
  std::vector<std::filesystem::path> artifacts;
};

/// Runs a subcommand and writes its artifacts under out_dir. Nothing is left on disk when the run
/// errors; artifacts are kept when it completes with failed certificates.
RunOutcome run(const std::string& subcommand, const nlohmann::json& config, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed = std::nullopt);

/// Reads the field CSV written by write_field_csv (leading '#' lines skipped). Throws ConfigError
/// for malformed files.
GridField read_field_csv(std::istream& is, const std::string& key_path = "$");

}  // namespace thinfb
