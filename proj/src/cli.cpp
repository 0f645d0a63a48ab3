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

#include <relitex/cli.hpp>

#include <relitex/error.hpp>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace relitex {

namespace {

std::string trim(const std::string& s) {
    const size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T> T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T v{};
    in >> v;
    if (!in || !(in >> std::ws).eof()) {
        throw ConfigError("invalid value '" + value + "' for " + key);
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no" || value == "off") {
        return false;
    }
    throw ConfigError("invalid boolean '" + value + "' for " + key);
}

std::string unquote(const std::string& value) {
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
        return value.substr(1, value.size() - 2);
    }
    return value;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = {
            {"mesh", [](RunConfig& c, auto&, auto& v) { c.mesh = v; }},
            {"prompt", [](RunConfig& c, auto&, auto& v) { c.prompt = v; }},
            {"negative_prompt", [](RunConfig& c, auto&, auto& v) { c.negative_prompt = v; }},
            {"lights", [](RunConfig& c, auto&, auto& v) { c.lights = v; }},
            {"backend", [](RunConfig& c, auto&, auto& v) { c.backend = v; }},
            {"backend_url", [](RunConfig& c, auto&, auto& v) { c.backend_url = v; }},
            {"backend_timeout",
                    [](RunConfig& c, auto& k, auto& v) { c.backend_timeout = parse_number<double>(k, v); }},
            {"resolution", [](RunConfig& c, auto& k, auto& v) { c.resolution = parse_number<int>(k, v); }},
            {"iterations",
                    [](RunConfig& c, auto& k, auto& v) { c.optim.total_iterations = parse_number<int>(k, v); }},
            {"warmup",
                    [](RunConfig& c, auto& k, auto& v) { c.optim.warmup_iterations = parse_number<int>(k, v); }},
            {"batch", [](RunConfig& c, auto& k, auto& v) { c.optim.batch = parse_number<int>(k, v); }},
            {"lr", [](RunConfig& c, auto& k, auto& v) { c.optim.lr = parse_number<double>(k, v); }},
            {"lambda_recon",
                    [](RunConfig& c, auto& k, auto& v) { c.optim.lambda_recon = parse_number<double>(k, v); }},
            {"lambda_reg",
                    [](RunConfig& c, auto& k, auto& v) { c.optim.lambda_reg = parse_number<double>(k, v); }},
            {"t_max", [](RunConfig& c, auto& k, auto& v) { c.optim.t_max = parse_number<double>(k, v); }},
            {"t_min", [](RunConfig& c, auto& k, auto& v) { c.optim.t_min = parse_number<double>(k, v); }},
            {"cfg", [](RunConfig& c, auto& k, auto& v) { c.optim.cfg = parse_number<double>(k, v); }},
            {"reg_samples",
                    [](RunConfig& c, auto& k, auto& v) { c.optim.reg_samples = parse_number<int>(k, v); }},
            {"reg_epsilon",
                    [](RunConfig& c, auto& k, auto& v) { c.optim.reg_epsilon = parse_number<double>(k, v); }},
            {"seed", [](RunConfig& c, auto& k, auto& v) { c.optim.seed = parse_number<uint64_t>(k, v); }},
            {"out", [](RunConfig& c, auto&, auto& v) { c.out = v; }},
            {"dump_conditioning",
                    [](RunConfig& c, auto& k, auto& v) { c.dump_conditioning = parse_bool(k, v); }},
            {"dump_snapshots", [](RunConfig& c, auto& k, auto& v) { c.dump_snapshots = parse_bool(k, v); }},
            {"bake_resolution",
                    [](RunConfig& c, auto& k, auto& v) { c.bake_resolution = parse_number<int>(k, v); }},
            {"turntable_frames",
                    [](RunConfig& c, auto& k, auto& v) { c.turntable_frames = parse_number<int>(k, v); }},
    };
    return table;
}

const std::map<std::string, std::string>& help_texts() {
    static const std::map<std::string, std::string> texts = {
            {"mesh", "triangle OBJ with UVs (required)"},
            {"prompt", "text prompt (required)"},
            {"negative_prompt", "negative prompt"},
            {"lights", "lighting manifest (one .hdr path per line; first is the canonical light)"},
            {"backend", "guidance backend: stub | remote (default stub)"},
            {"backend_url", "guidance server URL, e.g. http://127.0.0.1:8000"},
            {"backend_timeout", "per-request timeout in seconds (default 120)"},
            {"resolution", "render resolution: 128 | 256 | 512 (default 256)"},
            {"iterations", "total iterations (default 400)"},
            {"warmup", "reconstruction-only warm-up iterations (default 50)"},
            {"batch", "random views per SDS iteration (default 4)"},
            {"lr", "Adam learning rate (default 0.01)"},
            {"lambda_recon", "reconstruction loss weight (default 1000)"},
            {"lambda_reg", "smoothness regularizer weight (default 10)"},
            {"t_max", "SDS timestep at the first SDS iteration (default 0.1)"},
            {"t_min", "SDS timestep at the last SDS iteration (default 0.02)"},
            {"cfg", "classifier-free guidance scale (default 50)"},
            {"reg_samples", "surface samples for the regularizer (default 10000)"},
            {"reg_epsilon", "regularizer perturbation radius (default 0.01)"},
            {"seed", "random seed (default 0)"},
            {"out", "output directory (default relitex_out)"},
            {"dump_conditioning", "write the conditioning images of every request"},
            {"dump_snapshots", "write canonical-view renders every 50 iterations"},
            {"bake_resolution", "UV map resolution (default 1024)"},
            {"turntable_frames", "turntable frame count (default 36)"},
    };
    return texts;
}

bool is_boolean_key(const std::string& key) {
    return key == "dump_conditioning" || key == "dump_snapshots";
}

std::string flag_name(const std::string& key) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    return flag;
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [key, setter] : setters()) {
            k.push_back(key);
        }
        return k;
    }();
    return keys;
}

void apply_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    for (const auto& [name, setter] : setters()) {
        if (name == key) {
            setter(config, key, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const size_t hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unquote(trim(line.substr(eq + 1)));
        try {
            apply_config_value(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    apply_config_text(config, buffer.str(), path.string());
}

void RunConfig::validate() const {
    if (mesh.empty()) {
        throw ConfigError("no mesh given (--mesh)");
    }
    if (!std::filesystem::is_regular_file(mesh)) {
        throw MeshError("cannot open mesh file " + mesh.string());
    }
    if (prompt.empty()) {
        throw ConfigError("no prompt given (--prompt)");
    }
    if (!lights.empty() && !std::filesystem::is_regular_file(lights)) {
        throw ConfigError("cannot open lighting manifest " + lights.string());
    }
    if (backend != "stub" && backend != "remote") {
        throw ConfigError("backend must be 'stub' or 'remote', got '" + backend + "'");
    }
    if (backend == "remote" && backend_url.empty()) {
        throw ConfigError("the remote backend needs --backend-url or RELITEX_BACKEND_URL");
    }
    if (!(backend_timeout > 0.0)) {
        throw ConfigError("backend timeout must be positive");
    }
    if (resolution != 128 && resolution != 256 && resolution != 512) {
        throw ConfigError("resolution must be 128, 256 or 512, got " + std::to_string(resolution));
    }
    if (bake_resolution < 64) {
        throw ConfigError("bake resolution must be at least 64");
    }
    if (turntable_frames < 1) {
        throw ConfigError("turntable frames must be positive");
    }
    optim.validate();
}

std::optional<RunConfig> parse_command_line(int argc, const char* const* argv, const EnvLookup& env) {
    CLI::App app("Optimizes relightable material textures for a mesh from a text prompt.", "relitex");
    std::string config_path;
    app.add_option("--config", config_path, "key = value config file; flags override it");
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    for (const std::string& key : config_keys()) {
        if (is_boolean_key(key)) {
            options[key] = app.add_flag(flag_name(key), help_texts().at(key));
        } else {
            options[key] = app.add_option(flag_name(key), values[key], help_texts().at(key));
        }
    }
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) {
        args.emplace_back(argv[i]);
    }
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        std::fputs(app.help().c_str(), stdout);
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    RunConfig config;
    if (!config_path.empty()) {
        apply_config_file(config, config_path);
    }
    for (const std::string& key : config_keys()) {
        if (options[key]->count() == 0) {
            continue;
        }
        apply_config_value(config, key, is_boolean_key(key) ? "true" : values[key]);
    }
    if (config.backend_url.empty()) {
        const EnvLookup lookup = env ? env : [](const std::string& name) -> std::optional<std::string> {
            const char* v = std::getenv(name.c_str());
            return v ? std::optional<std::string>(v) : std::nullopt;
        };
        if (auto url = lookup("RELITEX_BACKEND_URL"); url && !url->empty()) {
            config.backend_url = *url;
        }
    }
    return config;
}

void run(const RunConfig& config) {
    config.validate();
    const std::filesystem::path& out = config.out;
    std::filesystem::create_directories(out);

    spdlog::info("loading mesh {}", config.mesh.string());
    const Mesh mesh = load_mesh(config.mesh);
    spdlog::info("mesh: {} vertices, {} faces", mesh.vertex_count(), mesh.face_count());

    LightingPool pool;
    if (config.lights.empty()) {
        spdlog::info("prefiltering the built-in studio lighting pool");
        pool = LightingPool::studio();
    } else {
        spdlog::info("prefiltering lighting manifest {}", config.lights.string());
        pool = LightingPool::from_environments(load_lighting_manifest(config.lights));
    }

    std::unique_ptr<GuidanceBackend> backend;
    if (config.backend == "stub") {
        backend = std::make_unique<StubBackend>();
    } else {
        backend = std::make_unique<RemoteBackend>(config.backend_url,
                std::chrono::milliseconds(int64_t(config.backend_timeout * 1000.0)));
    }
    spdlog::info("guidance backend: {}", backend->name());

    const CanonicalSetup setup = make_canonical_setup(mesh, pool.lights[0], config.resolution);
    spdlog::info("stage 1: generating the reference grid");
    const ReferenceSet reference = stage1_reference(setup, config.prompt, config.negative_prompt,
            *backend, config.optim.cfg, config.optim.seed);
    write_png(out / "reference" / "grid.png", reference.grid);
    if (config.dump_conditioning) {
        std::array<Image, 4> tiles;
        for (size_t v = 0; v < 4; ++v) {
            tiles[v] = reference.conditioning[v].image;
            write_png(out / "conditioning" / ("view_" + std::to_string(v) + ".png"), tiles[v]);
        }
        write_png(out / "conditioning" / "grid.png", assemble_grid(tiles));
    }

    spdlog::info("stage 2: optimizing for {} iterations", config.optim.total_iterations);
    TextureField field(FieldConfig{}, config.optim.seed);
    OptimizeOptions options;
    options.prompt = config.prompt;
    options.negative_prompt = config.negative_prompt;
    options.log_path = out / "run_log.csv";
    if (config.dump_snapshots) {
        options.snapshot_dir = out / "snapshots";
    }
    options.on_iteration = [&](const IterationLog& e) {
        if (e.iteration % 10 == 0 || e.iteration + 1 == config.optim.total_iterations) {
            spdlog::info("iteration {:4d} {:13s} total {:.6g}", e.iteration, to_string(e.kind), e.total);
        }
    };
    const OptimizeResult result =
            optimize(mesh, field, setup, reference, config.optim, *backend, pool, options);
    if (result.skipped > 0) {
        spdlog::warn("{} iterations were skipped after guidance failures", result.skipped);
    }

    save_checkpoint(out / "field.rlxf", field);
    spdlog::info("baking {}x{} material maps", config.bake_resolution, config.bake_resolution);
    write_material_maps(out / "maps", bake_uv(mesh, field, config.bake_resolution));

    const std::vector<RenderedImage> frames =
            turntable(mesh, field, setup.light, config.turntable_frames, config.resolution);
    for (size_t f = 0; f < frames.size(); ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03zu.png", f);
        write_png(out / "turntable" / name, display(frames[f]));
    }
    spdlog::info("wrote outputs to {}", out.string());
}

int cli_main(int argc, const char* const* argv) {
    try {
        const std::optional<RunConfig> config = parse_command_line(argc, argv);
        if (!config) {
            return kExitOk;
        }
        run(*config);
        return kExitOk;
    } catch (const ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return kExitConfig;
    } catch (const MeshError& e) {
        spdlog::error("mesh error: {}", e.what());
        return kExitMesh;
    } catch (const BackendError& e) {
        spdlog::error("guidance backend error: {}", e.what());
        return kExitBackend;
    } catch (const NumericError& e) {
        spdlog::error("numeric error: {}", e.what());
        return kExitNumeric;
    } catch (const ImageError& e) {
        spdlog::error("image error: {}", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitFailure;
    }
}

} // namespace relitex
