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

#include <relitex/envlight.hpp>

#include <relitex/brdf.hpp>
#include <relitex/error.hpp>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <fstream>
#include <sstream>

namespace relitex {

void validate_radiance(const Image& radiance) {
    if (radiance.channels != 3) {
        throw ImageError("environment map must have 3 channels");
    }
    if (radiance.width < 2 || radiance.height * 2 != radiance.width) {
        throw ImageError("environment map must be equirectangular with height = width / 2, got " +
                std::to_string(radiance.width) + "x" + std::to_string(radiance.height));
    }
    for (float v : radiance.pixels) {
        if (!std::isfinite(v)) {
            throw ImageError("environment map contains NaN or infinite texels");
        }
        if (v < 0.0f) {
            throw ImageError("environment map contains negative texels");
        }
    }
}

Vec3f EnvironmentLight::lookup(const Vec3f& dir) const {
    const EquirectCoord<float> uv = equirect_coord(dir, rotation, false);
    return intensity_scale * sample_bilinear(radiance, uv.u, uv.v);
}

EnvironmentLight transform_light(const EnvironmentLight& light, float rotation, float scale) {
    if (!(scale > 0.0f) || !std::isfinite(scale)) {
        throw ConfigError("light intensity scale must be positive");
    }
    EnvironmentLight out = light;
    out.rotation = light.rotation + rotation;
    out.intensity_scale = light.intensity_scale * scale;
    return out;
}

namespace {

/// Box-filtered mip pyramid of an equirect map for solid-angle-aware lookups.
class RadiancePyramid {
public:
    explicit RadiancePyramid(const Image& base) {
        mLevels.push_back(base);
        while (mLevels.back().width >= 8 && mLevels.back().width % 2 == 0 &&
                mLevels.back().height % 2 == 0) {
            mLevels.push_back(downsample(mLevels.back(), 2));
        }
        mTexelSolidAngle = float(4.0 * kPi / double(base.pixel_count()));
    }

    int level_count() const { return int(mLevels.size()); }
    int base_width() const { return mLevels.front().width; }

    /// Level of detail whose texels cover roughly `solid_angle` steradians.
    float lod_for(float solid_angle) const {
        const float lod = 0.5f * std::log2(std::max(solid_angle, 1e-20f) / mTexelSolidAngle) + 1.0f;
        return std::clamp(lod, 0.0f, float(level_count() - 1));
    }

    Vec3f sample(const Vec3f& dir, float lod) const {
        const EquirectCoord<float> uv = equirect_coord(dir, 0.0f, false);
        const int l0 = std::clamp(int(std::floor(lod)), 0, level_count() - 1);
        const int l1 = std::min(l0 + 1, level_count() - 1);
        const float f = lod - float(l0);
        const Vec3f a = sample_bilinear(mLevels[size_t(l0)], uv.u, uv.v);
        if (f <= 0.0f || l0 == l1) {
            return a;
        }
        return a * (1.0f - f) + sample_bilinear(mLevels[size_t(l1)], uv.u, uv.v) * f;
    }

private:
    std::vector<Image> mLevels;
    float mTexelSolidAngle = 1.0f;
};

template <typename Fn> void for_each_row(int height, Fn&& fn) {
    tbb::parallel_for(tbb::blocked_range<int>(0, height), [&](const tbb::blocked_range<int>& r) {
        for (int y = r.begin(); y != r.end(); ++y) {
            fn(y);
        }
    });
}

Image irradiance_map(const RadiancePyramid& pyramid, float rotation, float scale, int out_width,
        int samples) {
    if (out_width < 2 || out_width % 2 != 0 || samples < 1) {
        throw ConfigError("irradiance map width must be even and samples positive");
    }
    Image out(out_width, out_width / 2, 3);
    const auto count = uint32_t(samples);
    for_each_row(out.height, [&](int y) {
        for (int x = 0; x < out.width; ++x) {
            const Vec3f n = rotate_about_up(equirect_texel_direction(x, y, out.width, out.height),
                    -rotation);
            Vec3f t, b;
            orthonormal_basis(n, t, b);
            Vec3d sum = Vec3d::Zero();
            for (uint32_t i = 0; i < count; ++i) {
                const Vec3f local = sample_cosine_hemisphere(hammersley(i, count));
                const Vec3f l = t * local.x() + b * local.y() + n * local.z();
                // pdf = cos / pi
                const float omega = float(kPi) / (float(count) * std::max(local.z(), 1e-4f));
                sum += pyramid.sample(l, pyramid.lod_for(omega)).cast<double>();
            }
            const Vec3d e = sum * (kPi / double(count)) * double(scale);
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = float(e[c]);
            }
        }
    });
    return out;
}

int specular_mip_width(int base_width, int mip) {
    return std::max(16, base_width >> std::max(0, mip - 1));
}

std::vector<Image> specular_chain(const RadiancePyramid& pyramid, float rotation, float scale,
        int mip_count, int base_width, int samples) {
    if (mip_count < 2) {
        throw ConfigError("prefilter_specular requires mip_count >= 2");
    }
    if (base_width < 16 || base_width % 2 != 0 || samples < 1) {
        throw ConfigError("specular base width must be even and >= 16");
    }
    std::vector<Image> mips;
    const auto count = uint32_t(samples);
    for (int k = 0; k < mip_count; ++k) {
        const int width = specular_mip_width(base_width, k);
        Image mip(width, width / 2, 3);
        const float roughness = float(k) / float(mip_count - 1);
        const float alpha = roughness * roughness;
        const float resample_lod = std::clamp(
                std::log2(float(pyramid.base_width()) / float(width)), 0.0f,
                float(pyramid.level_count() - 1));
        for_each_row(mip.height, [&](int y) {
            for (int x = 0; x < width; ++x) {
                const Vec3f n = rotate_about_up(equirect_texel_direction(x, y, width, mip.height),
                        -rotation);
                Vec3f value;
                if (k == 0) {
                    value = pyramid.sample(n, resample_lod);
                } else {
                    Vec3f t, b;
                    orthonormal_basis(n, t, b);
                    Vec3d sum = Vec3d::Zero();
                    double weight = 0.0;
                    for (uint32_t i = 0; i < count; ++i) {
                        const Vec3f h = sample_ggx_half_vector(hammersley(i, count), alpha);
                        const float n_dot_l = 2.0f * h.z() * h.z() - 1.0f;
                        if (n_dot_l <= 0.0f) {
                            continue;
                        }
                        const Vec3f hw = t * h.x() + b * h.y() + n * h.z();
                        const Vec3f l = 2.0f * h.z() * hw - n;
                        // With v = n the reflected-direction pdf is D / 4.
                        const float pdf = ggx_distribution(h.z(), roughness) * 0.25f;
                        const float omega = 1.0f / (float(count) * std::max(pdf, 1e-8f));
                        sum += pyramid.sample(l, pyramid.lod_for(omega)).cast<double>() *
                                double(n_dot_l);
                        weight += n_dot_l;
                    }
                    value = weight > 0.0 ? Vec3f((sum / weight).cast<float>()) : Vec3f::Zero();
                }
                for (int c = 0; c < 3; ++c) {
                    mip.at(x, y, c) = value[c] * scale;
                }
            }
        });
        mips.push_back(std::move(mip));
    }
    return mips;
}

} // namespace

Image compute_irradiance(const EnvironmentLight& light, int out_width, int samples) {
    validate_radiance(light.radiance);
    const RadiancePyramid pyramid(light.radiance);
    return irradiance_map(pyramid, light.rotation, light.intensity_scale, out_width, samples);
}

std::vector<Image> prefilter_specular(const EnvironmentLight& light, int mip_count, int base_width,
        int samples) {
    validate_radiance(light.radiance);
    const RadiancePyramid pyramid(light.radiance);
    return specular_chain(pyramid, light.rotation, light.intensity_scale, mip_count, base_width,
            samples);
}

BrdfLut integrate_brdf_lut(int resolution, int samples) {
    if (resolution < 16) {
        throw ConfigError("BRDF LUT resolution must be >= 16");
    }
    BrdfLut lut;
    lut.resolution = resolution;
    lut.table = Image(resolution, resolution, 2);
    const auto count = uint32_t(samples);
    for_each_row(resolution, [&](int j) {
        const float roughness = (float(j) + 0.5f) / float(resolution);
        const float alpha = roughness * roughness;
        for (int i = 0; i < resolution; ++i) {
            const float n_dot_v = (float(i) + 0.5f) / float(resolution);
            const Vec3f v(std::sqrt(1.0f - n_dot_v * n_dot_v), 0.0f, n_dot_v);
            double a = 0.0;
            double b = 0.0;
            for (uint32_t s = 0; s < count; ++s) {
                const Vec3f h = sample_ggx_half_vector(hammersley(s, count), alpha);
                const float v_dot_h = v.dot(h);
                const Vec3f l = 2.0f * v_dot_h * h - v;
                const float n_dot_l = l.z();
                if (n_dot_l <= 0.0f || v_dot_h <= 0.0f) {
                    continue;
                }
                const float g = geometric_smith(n_dot_v, n_dot_l, roughness);
                const float g_vis = g * v_dot_h / (h.z() * n_dot_v);
                const float fc = pow5(1.0f - v_dot_h);
                a += double((1.0f - fc) * g_vis);
                b += double(fc * g_vis);
            }
            lut.table.at(i, j, 0) = float(a / double(count));
            lut.table.at(i, j, 1) = float(b / double(count));
        }
    });
    return lut;
}

PrefilteredLight PrefilteredLight::prefilter(const EnvironmentLight& light,
        const PrefilterSettings& settings) {
    validate_radiance(light.radiance);
    const RadiancePyramid pyramid(light.radiance);
    auto products = std::make_shared<PrefilteredProducts>();
    products->irradiance =
            irradiance_map(pyramid, 0.0f, 1.0f, settings.irradiance_width, settings.irradiance_samples);
    products->specular_mips = specular_chain(pyramid, 0.0f, 1.0f, settings.mip_count,
            settings.specular_width, settings.specular_samples);
    products->brdf_lut = std::make_shared<const BrdfLut>(
            integrate_brdf_lut(settings.lut_resolution, settings.lut_samples));
    return from_products(std::move(products), light.rotation, light.intensity_scale);
}

PrefilteredLight PrefilteredLight::from_products(std::shared_ptr<const PrefilteredProducts> products,
        float rotation, float intensity_scale) {
    if (!products || products->specular_mips.size() < 2 || !products->brdf_lut) {
        throw Error("prefiltered light is missing products");
    }
    PrefilteredLight light;
    light.mProducts = std::move(products);
    light.mRotation = rotation;
    light.mScale = intensity_scale;
    return light;
}

PrefilteredLight PrefilteredLight::transformed(float rotation, float scale) const {
    if (!(scale > 0.0f) || !std::isfinite(scale)) {
        throw ConfigError("light intensity scale must be positive");
    }
    PrefilteredLight out = *this;
    out.mRotation = mRotation + rotation;
    out.mScale = mScale * scale;
    return out;
}

std::vector<LightingEntry> parse_lighting_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) {
        throw ConfigError("cannot open lighting manifest " + manifest.string());
    }
    std::vector<LightingEntry> entries;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ls(line);
        std::string path;
        if (!(ls >> path)) {
            continue;
        }
        LightingEntry entry;
        entry.path = path;
        if (entry.path.is_relative()) {
            entry.path = manifest.parent_path() / entry.path;
        }
        std::string rotation;
        if (ls >> rotation) {
            try {
                size_t used = 0;
                entry.rotation = std::stof(rotation, &used);
                if (used != rotation.size()) {
                    throw std::invalid_argument(rotation);
                }
            } catch (const std::exception&) {
                throw ConfigError("lighting manifest line " + std::to_string(number) +
                        ": bad rotation '" + rotation + "'");
            }
        }
        std::string extra;
        if (ls >> extra) {
            throw ConfigError("lighting manifest line " + std::to_string(number) +
                    ": unexpected token '" + extra + "'");
        }
        entries.push_back(entry);
    }
    if (entries.empty()) {
        throw ConfigError("lighting manifest " + manifest.string() + " lists no maps");
    }
    return entries;
}

std::vector<EnvironmentLight> load_lighting_manifest(const std::filesystem::path& manifest) {
    std::vector<EnvironmentLight> lights;
    for (const LightingEntry& entry : parse_lighting_manifest(manifest)) {
        EnvironmentLight light = load_hdr(entry.path);
        light.rotation = entry.rotation;
        lights.push_back(std::move(light));
    }
    return lights;
}

namespace {

struct KeyLight {
    float azimuth;     // degrees
    float elevation;   // degrees
    float radius;      // degrees
    Vec3f radiance;
};

struct StudioLayout {
    Vec3f ground;
    Vec3f sky;
    std::array<KeyLight, 3> keys;
};

const std::array<StudioLayout, 6>& studio_layouts() {
    static const std::array<StudioLayout, 6> layouts = {{
            {{0.03f, 0.03f, 0.03f}, {0.20f, 0.20f, 0.22f},
                    {{{30.0f, 35.0f, 14.0f, {9.0f, 8.6f, 8.0f}},
                            {200.0f, 20.0f, 24.0f, {1.6f, 1.7f, 2.0f}},
                            {110.0f, 70.0f, 10.0f, {3.0f, 3.0f, 3.0f}}}}},
            {{0.04f, 0.035f, 0.03f}, {0.15f, 0.16f, 0.20f},
                    {{{-60.0f, 25.0f, 18.0f, {6.5f, 6.0f, 5.2f}},
                            {80.0f, 10.0f, 12.0f, {4.0f, 4.2f, 5.0f}},
                            {170.0f, 50.0f, 20.0f, {1.0f, 1.0f, 1.0f}}}}},
            {{0.02f, 0.02f, 0.025f}, {0.10f, 0.10f, 0.12f},
                    {{{0.0f, 60.0f, 16.0f, {10.0f, 10.0f, 10.0f}},
                            {135.0f, 5.0f, 8.0f, {6.0f, 5.0f, 4.0f}},
                            {-120.0f, 15.0f, 22.0f, {1.2f, 1.3f, 1.5f}}}}},
            {{0.05f, 0.05f, 0.05f}, {0.25f, 0.24f, 0.22f},
                    {{{90.0f, 30.0f, 12.0f, {8.0f, 7.0f, 6.0f}},
                            {-90.0f, 30.0f, 12.0f, {5.0f, 5.5f, 6.5f}},
                            {180.0f, 80.0f, 25.0f, {1.0f, 1.0f, 1.0f}}}}},
            {{0.03f, 0.03f, 0.03f}, {0.12f, 0.14f, 0.18f},
                    {{{-30.0f, 10.0f, 20.0f, {5.0f, 5.0f, 5.0f}},
                            {60.0f, 45.0f, 9.0f, {9.0f, 8.5f, 7.5f}},
                            {150.0f, -10.0f, 15.0f, {1.5f, 1.2f, 1.0f}}}}},
            {{0.04f, 0.04f, 0.04f}, {0.18f, 0.18f, 0.18f},
                    {{{150.0f, 40.0f, 15.0f, {7.5f, 7.5f, 7.0f}},
                            {-150.0f, 20.0f, 15.0f, {3.0f, 3.2f, 3.5f}},
                            {30.0f, 0.0f, 30.0f, {0.8f, 0.8f, 0.8f}}}}},
    }};
    return layouts;
}

Vec3f direction_from_angles(float azimuth_deg, float elevation_deg) {
    const float az = azimuth_deg * float(kPi) / 180.0f;
    const float el = elevation_deg * float(kPi) / 180.0f;
    return {std::cos(el) * std::cos(az), std::sin(el), std::cos(el) * std::sin(az)};
}

float smoothstep(float edge0, float edge1, float x) {
    const float t = saturate((x - edge0) / (edge1 - edge0));
    return t * t * (3.0f - 2.0f * t);
}

} // namespace

EnvironmentLight make_studio_environment(int variant, int width) {
    if (variant < 0 || variant >= 6) {
        throw ConfigError("studio environment variant must be in [0, 6)");
    }
    const StudioLayout& layout = studio_layouts()[size_t(variant)];
    EnvironmentLight light;
    light.radiance = Image(width, width / 2, 3);
    for (int y = 0; y < light.radiance.height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec3f d = equirect_texel_direction(x, y, width, light.radiance.height);
            const float up = smoothstep(-0.2f, 0.6f, d.y());
            Vec3f value = layout.ground * (1.0f - up) + layout.sky * up;
            for (const KeyLight& key : layout.keys) {
                const Vec3f center = direction_from_angles(key.azimuth, key.elevation);
                const float inner = std::cos(key.radius * float(kPi) / 180.0f);
                const float outer = std::cos(key.radius * 1.35f * float(kPi) / 180.0f);
                value += key.radiance * smoothstep(outer, inner, d.dot(center));
            }
            for (int c = 0; c < 3; ++c) {
                light.radiance.at(x, y, c) = value[c];
            }
        }
    }
    return light;
}

EnvironmentLight make_uniform_environment(const Vec3f& radiance, int width) {
    EnvironmentLight light;
    light.radiance = Image(width, width / 2, 3);
    for (size_t i = 0; i < light.radiance.pixel_count(); ++i) {
        for (int c = 0; c < 3; ++c) {
            light.radiance.pixel(i)[c] = radiance[c];
        }
    }
    return light;
}

} // namespace relitex
