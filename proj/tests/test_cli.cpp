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


#include <doctest.h>

#include <relitex/cli.hpp>
#include <relitex/error.hpp>

#include "support/helpers.hpp"

#include <sys/wait.h>

#include <fstream>
#include <map>
#include <sstream>

using namespace relitex;
using relitex::testing::TempDir;

namespace {

/// Every RunConfig field in one string, for whole-config comparisons.
std::string describe(const RunConfig& c) {
    std::ostringstream out;
    out << c.mesh << '|' << c.prompt << '|' << c.negative_prompt << '|' << c.lights << '|'
        << c.backend << '|' << c.backend_url << '|' << c.backend_timeout << '|' << c.resolution
        << '|' << c.optim.total_iterations << '|' << c.optim.warmup_iterations << '|' << c.optim.batch
        << '|' << c.optim.lr << '|' << c.optim.lambda_recon << '|' << c.optim.lambda_reg << '|'
        << c.optim.t_max << '|' << c.optim.t_min << '|' << c.optim.cfg << '|' << c.optim.reg_samples
        << '|' << c.optim.reg_epsilon << '|' << c.optim.seed << '|' << c.out << '|'
        << c.dump_conditioning << '|' << c.dump_snapshots << '|' << c.bake_resolution << '|'
        << c.turntable_frames;
    return out.str();
}

/// A non-default value for every config key.
const std::map<std::string, std::string>& sample_values() {
    static const std::map<std::string, std::string> values = {
            {"mesh", "chair.obj"},
            {"prompt", "a wooden chair"},
            {"negative_prompt", "blurry"},
            {"lights", "lights.txt"},
            {"backend", "remote"},
            {"backend_url", "http://127.0.0.1:9000"},
            {"backend_timeout", "30"},
            {"resolution", "512"},
            {"iterations", "123"},
            {"warmup", "7"},
            {"batch", "2"},
            {"lr", "0.005"},
            {"lambda_recon", "500"},
            {"lambda_reg", "3"},
            {"t_max", "0.2"},
            {"t_min", "0.05"},
            {"cfg", "7.5"},
            {"reg_samples", "99"},
            {"reg_epsilon", "0.02"},
            {"seed", "42"},
            {"out", "results"},
            {"dump_conditioning", "true"},
            {"dump_snapshots", "true"},
            {"bake_resolution", "256"},
            {"turntable_frames", "12"},
    };
    return values;
}

std::string flag_for(const std::string& key) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    return flag;
}

RunConfig parse(std::vector<std::string> args, const EnvLookup& env = [](const std::string&) {
    return std::optional<std::string>();
}) {
    args.insert(args.begin(), "relitex");
    std::vector<const char*> argv;
    for (const std::string& a : args) {
        argv.push_back(a.c_str());
    }
    const std::optional<RunConfig> config = parse_command_line(int(argv.size()), argv.data(), env);
    REQUIRE(config.has_value());
    return *config;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct Outcome {
    int status = -1;
    std::string output;
};

Outcome run_cli(const std::string& args, const std::filesystem::path& log) {
    const std::string command = std::string("\"") + RELITEX_CLI_PATH + "\" " + args + " > \"" +
            log.string() + "\" 2>&1";
    const int raw = std::system(command.c_str());
    Outcome outcome;
    outcome.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    outcome.output = read_text(log);
    return outcome;
}

const std::filesystem::path& sphere_obj() {
    static TempDir dir("cli_mesh");
    static const std::filesystem::path path = [] {
        const std::filesystem::path p = dir / "sphere.obj";
        write_obj(p, make_uv_sphere(48, 24));
        return p;
    }();
    return path;
}

} // namespace

TEST_CASE("defaults follow the optimizer configuration") {
    const RunConfig c = parse({});
    CHECK(c.optim.total_iterations == 400);
    CHECK(c.optim.warmup_iterations == 50);
    CHECK(c.optim.lambda_recon == 1000.0);
    CHECK(c.optim.lambda_reg == 10.0);
    CHECK(c.optim.cfg == 50.0);
    CHECK(c.backend == "stub");
    CHECK(c.resolution == 256);
    CHECK(c.backend_timeout == 120.0);
    CHECK(c.turntable_frames == 36);
}

TEST_CASE("every config key has a flag with the same effect") {
    CHECK(config_keys().size() == sample_values().size());
    for (const std::string& key : config_keys()) {
        CAPTURE(key);
        REQUIRE(sample_values().count(key) == 1);
        const std::string& value = sample_values().at(key);

        RunConfig from_file;
        apply_config_text(from_file, key + " = " + value + "\n", "test");
        const bool boolean = key.rfind("dump_", 0) == 0;
        const RunConfig from_flag =
                boolean ? parse({flag_for(key)}) : parse({flag_for(key), value});
        CHECK(describe(from_flag) == describe(from_file));
        CHECK(describe(from_flag) != describe(RunConfig{}));
    }
}

TEST_CASE("flags override the config file, which overrides defaults") {
    TempDir dir("cli_config");
    write_text(dir / "run.cfg",
            "# a comment line\n"
            "mesh = from_file.obj\n"
            "prompt = \"a marble bust\"   # trailing comment\n"
            "\n"
            "resolution = 512\n"
            "seed = 3\n"
            "dump_snapshots = yes\n");
    const RunConfig c = parse({"--config", (dir / "run.cfg").string(), "--resolution", "128",
            "--mesh", "from_flag.obj"});
    CHECK(c.resolution == 128);
    CHECK(c.mesh == "from_flag.obj");
    CHECK(c.prompt == "a marble bust");
    CHECK(c.optim.seed == 3);
    CHECK(c.dump_snapshots);
    CHECK(c.optim.total_iterations == 400);

    SUBCASE("flag order does not matter") {
        const RunConfig d = parse({"--resolution", "128", "--config", (dir / "run.cfg").string()});
        CHECK(d.resolution == 128);
    }
    SUBCASE("config file errors name the line") {
        write_text(dir / "bad.cfg", "seed = 1\nwidth = 3\n");
        try {
            parse({"--config", (dir / "bad.cfg").string()});
            FAIL("expected a config error");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("bad.cfg:2") != std::string::npos);
            CHECK(std::string(e.what()).find("width") != std::string::npos);
        }
        write_text(dir / "noeq.cfg", "seed 1\n");
        CHECK_THROWS_AS(parse({"--config", (dir / "noeq.cfg").string()}), ConfigError);
        write_text(dir / "nan.cfg", "seed = many\n");
        CHECK_THROWS_AS(parse({"--config", (dir / "nan.cfg").string()}), ConfigError);
        CHECK_THROWS_AS(parse({"--config", (dir / "missing.cfg").string()}), ConfigError);
    }
    SUBCASE("unknown flags are config errors") {
        CHECK_THROWS_AS(parse({"--frobnicate", "3"}), ConfigError);
        CHECK_THROWS_AS(parse({"--resolution", "big"}), ConfigError);
    }
}

TEST_CASE("backend url falls back to the environment") {
    const EnvLookup env = [](const std::string& name) -> std::optional<std::string> {
        if (name == "RELITEX_BACKEND_URL") {
            return "http://env-host:8000";
        }
        return std::nullopt;
    };
    CHECK(parse({}, env).backend_url == "http://env-host:8000");
    CHECK(parse({"--backend-url", "http://flag-host:1"}, env).backend_url == "http://flag-host:1");

    TempDir dir("cli_env");
    write_text(dir / "url.cfg", "backend_url = http://file-host:2\n");
    CHECK(parse({"--config", (dir / "url.cfg").string()}, env).backend_url == "http://file-host:2");
    CHECK(parse({}).backend_url.empty());
}

TEST_CASE("run configuration validation") {
    RunConfig c;
    c.mesh = sphere_obj();
    c.prompt = "a helmet";
    CHECK_NOTHROW(c.validate());

    RunConfig bad = c;
    bad.resolution = 300;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.mesh = "/nonexistent/mesh.obj";
    CHECK_THROWS_AS(bad.validate(), MeshError);
    bad = c;
    bad.prompt.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.backend = "remote";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.backend_url = "http://127.0.0.1:1";
    CHECK_NOTHROW(bad.validate());
    bad = c;
    bad.backend = "magic";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.optim.warmup_iterations = 500;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.lights = "/nonexistent/lights.txt";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("exit codes") {
    TempDir dir("cli_exit");

    SUBCASE("help") {
        const Outcome o = run_cli("--help", dir / "help.log");
        CHECK(o.status == kExitOk);
        for (const char* flag : {"--mesh", "--prompt", "--negative-prompt", "--lights", "--backend",
                     "--backend-url", "--resolution", "--iterations", "--seed", "--out", "--config",
                     "--dump-conditioning", "--dump-snapshots"}) {
            CAPTURE(flag);
            CHECK(o.output.find(flag) != std::string::npos);
        }
    }
    SUBCASE("missing mesh names the path") {
        const std::string missing = (dir / "no_such_mesh.obj").string();
        const Outcome o = run_cli("--mesh \"" + missing + "\" --prompt helmet", dir / "mesh.log");
        CHECK(o.status == kExitMesh);
        CHECK(o.output.find(missing) != std::string::npos);
    }
    SUBCASE("unsupported resolution") {
        const Outcome o = run_cli("--mesh \"" + sphere_obj().string() + "\" --prompt helmet --resolution 300",
                dir / "res.log");
        CHECK(o.status == kExitConfig);
        CHECK(o.output.find("resolution") != std::string::npos);
    }
    SUBCASE("unparsable mesh") {
        write_text(dir / "quad.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1 4/1\n");
        const Outcome o = run_cli("--mesh \"" + (dir / "quad.obj").string() + "\" --prompt helmet",
                dir / "quad.log");
        CHECK(o.status == kExitMesh);
    }
    SUBCASE("unreachable guidance server") {
        const Outcome o = run_cli("--mesh \"" + sphere_obj().string() +
                        "\" --prompt helmet --resolution 128 --backend remote "
                        "--backend-url http://127.0.0.1:9 --backend-timeout 2 --out \"" +
                        (dir / "out").string() + "\"",
                dir / "remote.log");
        CHECK(o.status == kExitBackend);
        CHECK(o.output.find("127.0.0.1:9") != std::string::npos);
    }
}

TEST_CASE("warm-up only run writes every artifact, reproducibly") {
    TempDir dir("cli_run");
    const std::string common = "--mesh \"" + sphere_obj().string() +
            "\" --prompt \"a medieval steel helmet\" --backend stub --iterations 50 --resolution 128";
    const Outcome first = run_cli(common + " --out \"" + (dir / "a").string() + "\"", dir / "a.log");
    REQUIRE(first.status == kExitOk);

    std::ifstream log(dir / "a" / "run_log.csv");
    std::string line;
    std::getline(log, line);
    CHECK(line == log_header());
    int rows = 0;
    while (std::getline(log, line)) {
        CHECK(line.find(",warmup-recon,") != std::string::npos);
        ++rows;
    }
    CHECK(rows == 50);

    for (const char* map : {"kc.png", "km.png", "kr.png", "normal.png"}) {
        CHECK(std::filesystem::exists(dir / "a" / "maps" / map));
    }
    CHECK(std::filesystem::exists(dir / "a" / "field.rlxf"));
    CHECK(std::filesystem::exists(dir / "a" / "reference" / "grid.png"));
    int frames = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir / "a" / "turntable")) {
        frames += entry.path().extension() == ".png" ? 1 : 0;
    }
    CHECK(frames == 36);

    const Outcome second = run_cli(common + " --out \"" + (dir / "b").string() + "\"", dir / "b.log");
    REQUIRE(second.status == kExitOk);
    size_t compared = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir / "a")) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const std::filesystem::path rel = std::filesystem::relative(entry.path(), dir / "a");
        CAPTURE(rel);
        CHECK(read_text(entry.path()) == read_text(dir / "b" / rel));
        ++compared;
    }
    CHECK(compared >= 42);
}
