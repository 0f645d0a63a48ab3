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


#ifndef RELITEX_TESTS_HELPERS_HPP
#define RELITEX_TESTS_HELPERS_HPP

#include <relitex/envlight.hpp>
#include <relitex/geometry.hpp>

#include <atomic>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

namespace relitex::testing {

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        mPath = std::filesystem::temp_directory_path() /
                ("relitex_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
        std::filesystem::remove_all(mPath);
        std::filesystem::create_directories(mPath);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(mPath, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return mPath; }
    std::filesystem::path operator/(const std::string& name) const { return mPath / name; }

private:
    std::filesystem::path mPath;
};

inline Mesh parse_obj_text(const std::string& text) {
    std::istringstream in(text);
    return parse_obj(in);
}

/// Lightweight prefilter for tests that do not measure integration accuracy.
inline PrefilterSettings fast_prefilter() {
    PrefilterSettings s;
    s.irradiance_samples = 512;
    s.specular_width = 64;
    s.specular_samples = 256;
    s.lut_resolution = 32;
    s.lut_samples = 256;
    return s;
}

/// Environment that is black except for one bright texel.
inline EnvironmentLight single_texel_environment(int width, int x, int y, float value) {
    EnvironmentLight light;
    light.radiance = Image(width, width / 2, 3, 0.0f);
    for (int c = 0; c < 3; ++c) {
        light.radiance.at(x, y, c) = value;
    }
    return light;
}

/// Relative error that falls back to absolute error near zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

} // namespace relitex::testing

#endif // RELITEX_TESTS_HELPERS_HPP
