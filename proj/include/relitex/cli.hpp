/*
 * Copyright (C) 2026 The Relitex Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef RELITEX_CLI_HPP
#define RELITEX_CLI_HPP

#include <relitex/pipeline.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace relitex {

struct RunConfig {
    std::filesystem::path mesh;
    std::string prompt;
    std::string negative_prompt;
    std::filesystem::path lights;   // lighting manifest; empty selects the studio pool
    std::string backend = "stub";   // stub | remote
    std::string backend_url;
    double backend_timeout = 120.0; // seconds
    int resolution = 256;
    OptimConfig optim;
    std::filesystem::path out = "relitex_out";
    bool dump_conditioning = false;
    bool dump_snapshots = false;
    int bake_resolution = 1024;
    int turntable_frames = 36;

    /// Throws ConfigError (or MeshError for a missing mesh) when the config is unusable.
    void validate() const;
};

/// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitMesh = 3,
    kExitBackend = 4,
    kExitNumeric = 5,
};

/// Config-file keys, in the order they are documented. Each has a `--key-with-dashes` flag.
const std::vector<std::string>& config_keys();

/// Sets one field from its textual value. Throws ConfigError for unknown keys or bad values.
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// key = value pairs, one per line; `#` starts a comment; blank lines are ignored.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Flags override the config file, which overrides defaults. RELITEX_BACKEND_URL fills
/// backend_url when neither source sets it. Returns nullopt after --help.
std::optional<RunConfig> parse_command_line(int argc, const char* const* argv,
        const EnvLookup& env = {});

/// Stage 1, stage 2, bake and turntable; writes every artifact under config.out.
void run(const RunConfig& config);

/// Maps exceptions to ExitCode values and logs the message.
int cli_main(int argc, const char* const* argv);

} // namespace relitex

#endif // RELITEX_CLI_HPP
