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

#include <relitex/guidance.hpp>

#include <relitex/error.hpp>

#include <spdlog/spdlog.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <random>

namespace relitex {

namespace {

float rec709_luminance(const Vec3f& c) { return 0.2126f * c.x() + 0.7152f * c.y() + 0.0722f * c.z(); }

} // namespace

ConditioningImage conditioning_image(const GBuffer& gbuffer, const PrefilteredLight& light) {
    if (!light.valid()) {
        throw Error("conditioning image: light has no prefiltered products");
    }
    ConditioningImage cond;
    cond.camera = gbuffer.camera;
    cond.light = light;
    const float background = tonemap(kBackground);
    cond.image = Image(gbuffer.width, gbuffer.height, 3, background);
    std::array<MaterialSample, 3> basis;
    for (size_t b = 0; b < basis.size(); ++b) {
        basis[b].kc = Vec3f::Ones();
        basis[b].km = kBasisMaterials[b][0];
        basis[b].kr = kBasisMaterials[b][1];
        basis[b].kn = Vec3f::Zero();
    }
    tbb::parallel_for(tbb::blocked_range<size_t>(0, gbuffer.covered.size(), 256),
            [&](const tbb::blocked_range<size_t>& r) {
                for (size_t i = r.begin(); i != r.end(); ++i) {
                    const uint32_t idx = gbuffer.covered[i];
                    const ShadingPoint<float> p = shading_point<float>(gbuffer, idx);
                    float* px = cond.image.pixel(idx);
                    for (size_t b = 0; b < basis.size(); ++b) {
                        px[b] = tonemap(rec709_luminance(shade<float>(p, basis[b], light)));
                    }
                }
            });
    return cond;
}

ConditioningImage conditioning_image(const Mesh& mesh, const PrefilteredLight& light,
        const Camera& camera) {
    return conditioning_image(rasterize(mesh, camera), light);
}

Image assemble_grid(std::span<const Image> views) {
    if (views.size() != 4) {
        throw ConfigError("assemble_grid needs exactly 4 views, got " + std::to_string(views.size()));
    }
    for (const Image& v : views) {
        if (!v.same_shape(views[0]) || v.empty()) {
            throw ConfigError("assemble_grid: views must be non-empty and share one shape");
        }
    }
    const int w = views[0].width;
    const int h = views[0].height;
    const int c = views[0].channels;
    Image grid(2 * w, 2 * h, c);
    for (int tile = 0; tile < 4; ++tile) {
        const int ox = (tile % 2) * w;
        const int oy = (tile / 2) * h;
        for (int y = 0; y < h; ++y) {
            std::copy_n(&views[size_t(tile)].pixels[size_t(y) * w * c], size_t(w) * c,
                    &grid.pixels[(size_t(oy + y) * grid.width + ox) * c]);
        }
    }
    return grid;
}

std::array<Image, 4> split_grid(const Image& grid) {
    if (grid.empty() || grid.width % 2 != 0 || grid.height % 2 != 0) {
        throw ConfigError("split_grid: grid dimensions must be even");
    }
    const int w = grid.width / 2;
    const int h = grid.height / 2;
    const int c = grid.channels;
    std::array<Image, 4> views;
    for (int tile = 0; tile < 4; ++tile) {
        Image& v = views[size_t(tile)];
        v = Image(w, h, c);
        const int ox = (tile % 2) * w;
        const int oy = (tile / 2) * h;
        for (int y = 0; y < h; ++y) {
            std::copy_n(&grid.pixels[(size_t(oy + y) * grid.width + ox) * c], size_t(w) * c,
                    &v.pixels[size_t(y) * w * c]);
        }
    }
    return views;
}

double alpha_bar(double t) {
    const double c = std::cos(0.5 * kPi * t);
    return c * c;
}

Image add_noise(const Image& x, double t, const Image& epsilon) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw ConfigError("noise level t must be in [0, 1], got " + std::to_string(t));
    }
    if (!x.same_shape(epsilon)) {
        throw ConfigError("add_noise: noise and image shapes differ");
    }
    if (t == 0.0) {
        return x;
    }
    const double ab = alpha_bar(t);
    const float a = float(std::sqrt(ab));
    const float b = float(std::sqrt(1.0 - ab));
    Image out(x.width, x.height, x.channels);
    for (size_t i = 0; i < x.pixels.size(); ++i) {
        out.pixels[i] = a * x.pixels[i] + b * epsilon.pixels[i];
    }
    return out;
}

Image sample_noise(int width, int height, int channels, uint64_t seed) {
    Image out(width, height, channels);
    std::mt19937_64 rng(mix_seed(seed, 0x6e6f697365ULL));
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (float& v : out.pixels) {
        v = normal(rng);
    }
    return out;
}

const char* to_string(GuidanceMode mode) {
    return mode == GuidanceMode::Generate ? "generate" : "score";
}

void GuidanceRequest::validate() const {
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw ConfigError("guidance strength must be in [0, 1], got " + std::to_string(strength));
    }
    if (!std::isfinite(cfg_scale)) {
        throw ConfigError("guidance cfg_scale must be finite");
    }
    if (cond_image.empty() || cond_image.channels != 3) {
        throw ConfigError("guidance request needs a 3-channel conditioning image");
    }
    if (mode == GuidanceMode::Score) {
        if (!(t > 0.0 && t <= 1.0)) {
            throw ConfigError("score requests need t in (0, 1], got " + std::to_string(t));
        }
        if (noisy_image.width != cond_image.width || noisy_image.height != cond_image.height ||
                noisy_image.channels != 3) {
            throw ConfigError("score request: noisy image must match the conditioning image");
        }
    }
}

Vec3f StubBackend::prompt_color(std::string_view prompt) {
    uint64_t h = 0xcbf29ce484222325ULL;   // FNV-1a
    for (char ch : prompt) {
        h = (h ^ uint64_t(uint8_t(ch))) * 0x100000001b3ULL;
    }
    h = mix_seed(h);
    return {0.2f + 0.6f * float(h & 0xff) / 255.0f, 0.2f + 0.6f * float((h >> 8) & 0xff) / 255.0f,
            0.2f + 0.6f * float((h >> 16) & 0xff) / 255.0f};
}

Image StubBackend::target_for(const GuidanceRequest& request, int width, int height) const {
    if (mTarget) {
        Image target = mTarget(request);
        if (target.width != width || target.height != height || target.channels != 3) {
            throw BackendError(BackendErrorKind::Server, "stub target has the wrong shape");
        }
        return target;
    }
    const Vec3f color = prompt_color(request.prompt);
    Image target(width, height, 3);
    for (size_t i = 0; i < target.pixel_count(); ++i) {
        for (int c = 0; c < 3; ++c) {
            target.pixel(i)[c] = color[c];
        }
    }
    return target;
}

GuidanceResponse StubBackend::request(const GuidanceRequest& request) {
    try {
        request.validate();
    } catch (const ConfigError& e) {
        throw BackendError(BackendErrorKind::Schema, e.what());
    }
    GuidanceResponse response;
    if (request.mode == GuidanceMode::Generate) {
        response.image = mEcho ? request.cond_image
                               : target_for(request, request.cond_image.width, request.cond_image.height);
        return response;
    }
    const Image& xt = request.noisy_image;
    const Image mu = mEcho ? request.cond_image : target_for(request, xt.width, xt.height);
    const double ab = alpha_bar(request.t);
    const float a = float(std::sqrt(ab));
    const float inv_b = float(1.0 / std::sqrt(1.0 - ab));
    response.image = Image(xt.width, xt.height, xt.channels);
    for (size_t i = 0; i < xt.pixels.size(); ++i) {
        response.image.pixels[i] = (xt.pixels[i] - a * mu.pixels[i]) * inv_b;
    }
    return response;
}

SdsResult sds_gradient(const Image& x, const ConditioningImage& cond, const SdsParams& params,
        GuidanceBackend& backend) {
    SdsResult result;
    result.noise = sample_noise(x.width, x.height, x.channels, params.seed);
    GuidanceRequest request;
    request.mode = GuidanceMode::Score;
    request.prompt = params.prompt;
    request.negative_prompt = params.negative_prompt;
    request.cond_image = cond.image;
    request.noisy_image = add_noise(x, params.t, result.noise);
    request.t = params.t;
    request.strength = params.strength;
    request.cfg_scale = params.cfg_scale;
    request.seed = params.seed;
    request.views.push_back({cond.camera, cond.light});
    request.validate();

    for (int attempt = 0; attempt <= params.retries; ++attempt) {
        result.attempts = attempt + 1;
        try {
            GuidanceResponse response = backend.request(request);
            if (!response.image.same_shape(x)) {
                throw BackendError(BackendErrorKind::Schema, "score response shape differs from the request");
            }
            for (float v : response.image.pixels) {
                if (!std::isfinite(v)) {
                    throw BackendError(BackendErrorKind::Schema, "score response contains non-finite values");
                }
            }
            result.gradient = std::move(response.image);
            for (size_t i = 0; i < result.gradient.pixels.size(); ++i) {
                result.gradient.pixels[i] -= result.noise.pixels[i];
            }
            return result;
        } catch (const BackendError& e) {
            if (attempt == params.retries) {
                throw;
            }
            spdlog::warn("guidance backend {} failed (attempt {} of {}): {}", backend.name(),
                    attempt + 1, params.retries + 1, e.what());
        }
    }
    throw BackendError(BackendErrorKind::Unreachable, "no attempts were made");
}

} // namespace relitex
