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


#ifndef RELITEX_GUIDANCE_HPP
#define RELITEX_GUIDANCE_HPP

#include <relitex/envlight.hpp>
#include <relitex/geometry.hpp>
#include <relitex/image.hpp>
#include <relitex/renderer.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace relitex {

/// Three tone-mapped luminance renders (one per basis material) stacked as RGB.
struct ConditioningImage {
    Image image;
    Camera camera;
    PrefilteredLight light;
};

/// (km, kr) of the three basis materials; kc is always (1, 1, 1) and kn zero.
inline constexpr std::array<std::array<float, 2>, 3> kBasisMaterials = {{
        {0.0f, 1.0f},
        {0.5f, 0.5f},
        {1.0f, 0.0f},
}};

ConditioningImage conditioning_image(const GBuffer& gbuffer, const PrefilteredLight& light);
ConditioningImage conditioning_image(const Mesh& mesh, const PrefilteredLight& light,
        const Camera& camera);

/// Row-major 2x2 tiling: views land at top-left, top-right, bottom-left, bottom-right.
Image assemble_grid(std::span<const Image> views);
std::array<Image, 4> split_grid(const Image& grid);

/// Cosine schedule: alpha_bar(0) = 1, alpha_bar(1) = 0.
double alpha_bar(double t);

/// x_t = sqrt(alpha_bar) x + sqrt(1 - alpha_bar) epsilon.
Image add_noise(const Image& x, double t, const Image& epsilon);

/// Standard normal noise with the shape of `like`, deterministic in `seed`.
Image sample_noise(int width, int height, int channels, uint64_t seed);

enum class GuidanceMode { Generate, Score };

const char* to_string(GuidanceMode mode);

/// Camera and light behind one tile of a request. Only in-process backends see these.
struct ViewContext {
    Camera camera;
    PrefilteredLight light;
};

struct GuidanceRequest {
    GuidanceMode mode = GuidanceMode::Score;
    std::string prompt;
    std::string negative_prompt;
    Image cond_image;
    Image noisy_image;   // score mode only
    double t = 0.0;      // score mode only
    double strength = 1.0;
    double cfg_scale = 50.0;
    uint64_t seed = 0;
    std::vector<ViewContext> views;

    /// Throws ConfigError when a field is out of range for the mode.
    void validate() const;
};

struct GuidanceResponse {
    Image image;   // generate: RGB in [0, 1]; score: predicted noise
};

class GuidanceBackend {
public:
    virtual ~GuidanceBackend() = default;
    virtual std::string name() const = 0;
    /// Throws BackendError on failure.
    virtual GuidanceResponse request(const GuidanceRequest& request) = 0;
};

/// Deterministic stand-in for a diffusion model whose data distribution is a point mass
/// at a target image mu. Score mode answers (x_t - sqrt(alpha_bar) mu) / sqrt(1 - alpha_bar);
/// generate mode answers mu, or the conditioning image itself in echo mode.
class StubBackend final : public GuidanceBackend {
public:
    /// Display-space target for a request, shaped like the request's image.
    using TargetProvider = std::function<Image(const GuidanceRequest&)>;

    StubBackend() = default;
    explicit StubBackend(TargetProvider target, bool echo = false)
            : mTarget(std::move(target)), mEcho(echo) {}

    static std::unique_ptr<StubBackend> echo() {
        return std::make_unique<StubBackend>(TargetProvider{}, true);
    }

    std::string name() const override { return mEcho ? "stub-echo" : "stub"; }
    GuidanceResponse request(const GuidanceRequest& request) override;

    /// The solid color used when no target provider is configured.
    static Vec3f prompt_color(std::string_view prompt);

private:
    Image target_for(const GuidanceRequest& request, int width, int height) const;

    TargetProvider mTarget;
    bool mEcho = false;
};

/// HTTP+JSON client: POST <url>/v1/generate and <url>/v1/score.
class RemoteBackend final : public GuidanceBackend {
public:
    explicit RemoteBackend(std::string url,
            std::chrono::milliseconds timeout = std::chrono::seconds(120));
    ~RemoteBackend() override;

    std::string name() const override { return "remote(" + mUrl + ")"; }
    GuidanceResponse request(const GuidanceRequest& request) override;

private:
    struct Impl;
    std::string mUrl;
    std::unique_ptr<Impl> mImpl;
};

/// Wire format. Conditioning and generated images travel as base64 PNG; score-mode
/// arrays as {"shape": [h, w, c], "dtype": "float32", "data": base64 little-endian}.
std::string serialize_request(const GuidanceRequest& request);
GuidanceRequest parse_request(std::string_view body);
std::string serialize_response(const GuidanceResponse& response, GuidanceMode mode);
/// Throws BackendError(Schema) on malformed bodies or shapes that do not match the request.
GuidanceResponse parse_response(std::string_view body, const GuidanceRequest& request);

std::string base64_encode(std::span<const uint8_t> bytes);
std::vector<uint8_t> base64_decode(std::string_view text);

struct SdsParams {
    std::string prompt;
    std::string negative_prompt;
    double t = 0.1;
    double strength = 1.0;
    double cfg_scale = 50.0;
    uint64_t seed = 0;
    int retries = 3;
};

struct SdsResult {
    Image gradient;   // w(t) (eps_hat - eps), display space
    Image noise;      // the sampled eps
    int attempts = 0;
};

/// Noises the display-space image `x`, queries the backend in score mode and returns
/// the SDS gradient with w(t) = 1. Throws BackendError after the retries are exhausted.
SdsResult sds_gradient(const Image& x, const ConditioningImage& cond, const SdsParams& params,
        GuidanceBackend& backend);

} // namespace relitex

#endif // RELITEX_GUIDANCE_HPP
