#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "newsforge/gateway.hpp"

namespace newsforge {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitModuleError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitTargetMissed = 3;  // generate --strict only

/// Declarative tool configuration (JSON). String values may reference
/// environment variables as ${NAME}; relative paths resolve against the
/// directory of the config file.
struct AppConfig {
    std::map<std::string, BackendConfig> backends;
    std::string default_backend;
    std::filesystem::path template_dir;
    std::filesystem::path corpus_path;
    std::filesystem::path reports_dir;
    std::filesystem::path study_dir;
    std::optional<std::filesystem::path> ui_dir;
    std::optional<std::filesystem::path> guidelines_path;
    std::uint64_t seed = 0;
    int parallelism = 1;

    /// Throws Error(ConfigInvalid).
    static AppConfig load(const std::filesystem::path& path);
    static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

    const BackendConfig& backend(const std::string& name) const;
};

/// Replaces ${NAME} with the environment value. Unset variables throw
/// Error(ConfigInvalid); "$${" yields a literal "${".
std::string interpolate_env(const std::string& text);

struct CliHooks {
    /// Called by `serve` once the port is bound; `stop` ends the server.
    std::function<void(int port, std::function<void()> stop)> on_listening;
};

/// Runs the tool with argv-style arguments (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliHooks& hooks = {});

}  // namespace newsforge
