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

#ifndef RELITEX_ENVLIGHT_HPP
#define RELITEX_ENVLIGHT_HPP

#include <relitex/equirect.hpp>
#include <relitex/image.hpp>
#include <relitex/math.hpp>

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace relitex {

/// Lat-long HDR radiance with a lazy rotation about +y and an intensity scale.
struct EnvironmentLight {
    Image radiance;
    float rotation = 0.0f;
    float intensity_scale = 1.0f;

    int width() const { return radiance.width; }
    int height() const { return radiance.height; }

    /// Bilinear radiance seen along direction `dir` (transform applied).
    Vec3f lookup(const Vec3f& dir) const;
};

/// Throws ImageError unless the map is 2:1, RGB, finite and non-negative.
void validate_radiance(const Image& radiance);

std::array<uint8_t, 4> rgbe_encode(const Vec3f& rgb);
Vec3f rgbe_decode(const std::array<uint8_t, 4>& rgbe);

EnvironmentLight load_hdr(const std::filesystem::path& path);
EnvironmentLight parse_hdr(std::span<const uint8_t> bytes);
/// Radiance RGBE file; scanlines use the run-length layout with literal runs.
std::vector<uint8_t> encode_hdr(const Image& radiance);
void write_hdr(const std::filesystem::path& path, const Image& radiance);

/// Composes a rotation (radians about +y) and intensity scale onto `light`.
EnvironmentLight transform_light(const EnvironmentLight& light, float rotation, float scale);

/// Cosine-convolved irradiance, E(n) = integral of Li (wi . n) dwi with no 1/pi factor,
/// by quasi-Monte Carlo cosine-hemisphere sampling. Output is out_width x out_width/2.
Image compute_irradiance(const EnvironmentLight& light, int out_width, int samples = 2048);

/// GGX-prefiltered radiance; mip k corresponds to roughness k / (mip_count - 1).
std::vector<Image> prefilter_specular(const EnvironmentLight& light, int mip_count,
        int base_width = 128, int samples = 1024);

/// Split-sum environment BRDF: entry (n.v, kr) holds (A, B) such that the specular
/// integral is approximately prefiltered * (F0 * A + B).
struct BrdfLut {
    int resolution = 0;
    Image table;   // columns: n.v, rows: kr; channels: A, B

    Vec2f at(int nv_index, int roughness_index) const {
        return {table.at(nv_index, roughness_index, 0), table.at(nv_index, roughness_index, 1)};
    }
};

BrdfLut integrate_brdf_lut(int resolution, int samples = 1024);

struct PrefilterSettings {
    int irradiance_width = 32;
    int irradiance_samples = 2048;
    int mip_count = 6;
    int specular_width = 128;
    int specular_samples = 1024;
    int lut_resolution = 64;
    int lut_samples = 1024;
};

struct PrefilteredProducts {
    Image irradiance;
    std::vector<Image> specular_mips;
    std::shared_ptr<const BrdfLut> brdf_lut;
};

/// Immutable split-sum products plus a lookup transform. Copies share the products.
class PrefilteredLight {
public:
    PrefilteredLight() = default;

    static PrefilteredLight prefilter(const EnvironmentLight& light,
            const PrefilterSettings& settings = {});
    static PrefilteredLight from_products(std::shared_ptr<const PrefilteredProducts> products,
            float rotation = 0.0f, float intensity_scale = 1.0f);

    PrefilteredLight transformed(float rotation, float scale) const;

    bool valid() const { return mProducts != nullptr; }
    float rotation() const { return mRotation; }
    float intensity_scale() const { return mScale; }
    const PrefilteredProducts& products() const { return *mProducts; }
    int mip_count() const { return int(mProducts->specular_mips.size()); }

    /// Irradiance along n; optionally d(value)/d(n) with rows = color channels.
    template <typename T> Vec3<T> irradiance(const Vec3<T>& n, Mat3<T>* d_dir = nullptr) const;

    /// Prefiltered specular radiance along r for roughness kr.
    template <typename T>
    Vec3<T> specular(const Vec3<T>& r, T kr, Mat3<T>* d_dir = nullptr, Vec3<T>* d_kr = nullptr) const;

    /// (A, B) for the given n.v and roughness.
    template <typename T>
    Vec2<T> brdf(T n_dot_v, T kr, Vec2<T>* d_nv = nullptr, Vec2<T>* d_kr = nullptr) const;

private:
    template <typename T>
    Vec3<T> sample_direction(const Image& map, const Vec3<T>& dir, Mat3<T>* d_dir) const;

    std::shared_ptr<const PrefilteredProducts> mProducts;
    float mRotation = 0.0f;
    float mScale = 1.0f;
};

/// A lighting pool entry read from a manifest (one path and optional rotation per line).
struct LightingEntry {
    std::filesystem::path path;
    float rotation = 0.0f;
};

/// Manifest grammar: one entry per line, `<path> [rotation-radians]`; `#` starts a
/// comment; relative paths resolve against the manifest's directory.
std::vector<LightingEntry> parse_lighting_manifest(const std::filesystem::path& manifest);
std::vector<EnvironmentLight> load_lighting_manifest(const std::filesystem::path& manifest);

/// Synthetic studio environments with a few soft directional key lights over a dim
/// gradient; `variant` in [0, 6) selects the arrangement.
EnvironmentLight make_studio_environment(int variant, int width = 256);

/// Constant radiance everywhere.
EnvironmentLight make_uniform_environment(const Vec3f& radiance, int width = 64);

// ---------------------------------------------------------------------------------------

template <typename T>
Vec3<T> PrefilteredLight::sample_direction(const Image& map, const Vec3<T>& dir, Mat3<T>* d_dir) const {
    const EquirectCoord<T> uv = equirect_coord(dir, T(mRotation), d_dir != nullptr);
    const T s = uv.u * T(map.width) - T(0.5);
    const T t = uv.v * T(map.height) - T(0.5);
    const MapSample<T> m = sample_bspline<T>(map, s, t, true, d_dir != nullptr);
    const T scale = T(mScale);
    if (d_dir) {
        *d_dir = scale * (m.d_s * (T(map.width) * uv.du_ddir.transpose()) +
                                 m.d_t * (T(map.height) * uv.dv_ddir.transpose()));
    }
    return scale * m.value;
}

template <typename T> Vec3<T> PrefilteredLight::irradiance(const Vec3<T>& n, Mat3<T>* d_dir) const {
    return sample_direction(mProducts->irradiance, n, d_dir);
}

template <typename T>
Vec3<T> PrefilteredLight::specular(const Vec3<T>& r, T kr, Mat3<T>* d_dir, Vec3<T>* d_kr) const {
    const auto& mips = mProducts->specular_mips;
    const int last = int(mips.size()) - 1;
    const T level = saturate(kr) * T(last);
    const BSplineTaps<T> taps = bspline_taps(level);
    Vec3<T> value = Vec3<T>::Zero();
    if (d_dir) {
        d_dir->setZero();
    }
    if (d_kr) {
        d_kr->setZero();
    }
    for (int k = 0; k < 3; ++k) {
        const int mip = std::clamp(taps.index[k], 0, last);
        Mat3<T> jac;
        const Vec3<T> sample = sample_direction(mips[size_t(mip)], r, d_dir ? &jac : nullptr);
        value += taps.weight[k] * sample;
        if (d_dir) {
            *d_dir += taps.weight[k] * jac;
        }
        if (d_kr) {
            *d_kr += taps.derivative[k] * T(last) * sample;
        }
    }
    return value;
}

template <typename T>
Vec2<T> PrefilteredLight::brdf(T n_dot_v, T kr, Vec2<T>* d_nv, Vec2<T>* d_kr) const {
    const BrdfLut& lut = *mProducts->brdf_lut;
    const T res = T(lut.resolution);
    const MapSample<T> m = sample_bspline<T>(lut.table, saturate(n_dot_v) * res - T(0.5),
            saturate(kr) * res - T(0.5), false, d_nv || d_kr);
    if (d_nv) {
        *d_nv = Vec2<T>(m.d_s[0], m.d_s[1]) * res;
    }
    if (d_kr) {
        *d_kr = Vec2<T>(m.d_t[0], m.d_t[1]) * res;
    }
    return {m.value[0], m.value[1]};
}

} // namespace relitex

#endif // RELITEX_ENVLIGHT_HPP
