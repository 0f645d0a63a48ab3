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


#ifndef RELITEX_PIPELINE_HPP
#define RELITEX_PIPELINE_HPP

#include <relitex/envlight.hpp>
#include <relitex/geometry.hpp>
#include <relitex/guidance.hpp>
#include <relitex/renderer.hpp>
#include <relitex/texture_field.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace relitex {

struct OptimConfig {
    int total_iterations = 400;
    int warmup_iterations = 50;
    int batch = 4;
    double lr = 0.01;
    double lambda_recon = 1000.0;
    double lambda_reg = 10.0;
    double t_max = 0.1;
    double t_min = 0.02;
    double cfg = 50.0;
    int reg_samples = 10000;
    double reg_epsilon = 0.01;
    uint64_t seed = 0;

    /// Throws ConfigError when the invariants do not hold.
    void validate() const;
};

/// Vertical field of view for canonical and random cameras (45 degrees).
inline constexpr float kDefaultFov = 0.78539816f;
inline constexpr float kRandomElevationMin = -0.52359878f;   // -30 degrees
inline constexpr float kRandomElevationMax = 0.78539816f;    // 45 degrees

/// Prefiltered lights for random relighting; entry 0 is the canonical light L*.
struct LightingPool {
    std::vector<PrefilteredLight> lights;

    static LightingPool from_environments(const std::vector<EnvironmentLight>& environments,
            const PrefilterSettings& settings = {});
    /// The built-in studio environments.
    static LightingPool studio(const PrefilterSettings& settings = {});
    size_t size() const { return lights.size(); }
};

struct CanonicalSetup {
    std::array<Camera, 4> cameras;
    PrefilteredLight light;
    std::array<GBuffer, 4> gbuffers;
};

/// Four equator cameras at azimuths 0, 90, 180, 270 degrees framing the unit sphere.
CanonicalSetup make_canonical_setup(const Mesh& mesh, const PrefilteredLight& light, int resolution,
        float fov_y = kDefaultFov);

struct ReferenceSet {
    Image grid;
    std::array<Image, 4> views;   // display space
    std::array<ConditioningImage, 4> conditioning;
};

/// Conditions the four canonical views, makes one generate call on their 2x2 grid and
/// splits the answer. Backend failures propagate.
ReferenceSet stage1_reference(const CanonicalSetup& setup, const std::string& prompt,
        const std::string& negative_prompt, GuidanceBackend& backend, double cfg_scale,
        uint64_t seed);

template <typename T> struct ImageLoss {
    T value = 0;
    T l2 = 0;
    T perceptual = 0;
    ImageT<T> gradient;
};

inline constexpr int kPyramidLevels = 3;

/// L2 plus a 3-level Gaussian-pyramid L1, both normalized by the covered-pixel count.
/// Uncovered pixels of `reference` should already equal the render background.
template <typename T>
ImageLoss<T> recon_loss(const ImageT<T>& render, const ImageT<T>& reference,
        std::span<const uint8_t> mask);

struct RegLoss {
    double value = 0.0;
    std::vector<Vec3f> points;                 // p then p + eps, interleaved per sample
    std::vector<MaterialGrad> gradients;       // dL/dmaterial for every entry of points
};

/// Mean over samples of |kc(p) - kc(p + eps)|_1 with eps uniform in a ball projected
/// onto the tangent plane. Gradients are for the unweighted loss.
RegLoss smoothness_reg(const MaterialField& field, const Mesh& mesh, int samples, double epsilon,
        uint64_t seed);

enum class IterationKind { WarmupRecon, Recon, SdsCanonical, SdsRandom };

const char* to_string(IterationKind kind);

struct LightChoice {
    size_t pool_index = 0;
    float rotation = 0.0f;
    float scale = 1.0f;
};

struct IterationPlan {
    int iteration = 0;
    IterationKind kind = IterationKind::WarmupRecon;
    std::vector<Camera> cameras;
    std::vector<LightChoice> lights;   // empty means L* for every camera
    int sds_index = -1;                // k among N SDS iterations
    int sds_count = 0;                 // N
    double t = 0.0;
    double s = 0.0;

    bool is_sds() const { return kind == IterationKind::SdsCanonical || kind == IterationKind::SdsRandom; }
};

/// Number of SDS iterations in a run.
int sds_iteration_count(const OptimConfig& config);

IterationPlan schedule(int iteration, const OptimConfig& config, const CanonicalSetup& setup,
        size_t pool_size);

struct IterationLog {
    int iteration = 0;
    IterationKind kind = IterationKind::WarmupRecon;
    double t = 0.0;
    double s = 0.0;
    double recon = 0.0;
    double sds = 0.0;
    double reg = 0.0;
    double total = 0.0;
    bool skipped = false;
};

struct OptimizeOptions {
    std::string prompt;
    std::string negative_prompt;
    std::filesystem::path log_path;        // CSV, empty to disable
    std::filesystem::path snapshot_dir;    // empty to disable
    int snapshot_every = 50;
    std::function<void(const IterationLog&)> on_iteration;
};

struct OptimizeResult {
    std::vector<IterationLog> log;
    int skipped = 0;
};

/// Runs the full schedule on `field`. NaN losses raise NumericError; backend failures
/// skip the iteration.
OptimizeResult optimize(const Mesh& mesh, TextureField& field, const CanonicalSetup& setup,
        const ReferenceSet& reference, const OptimConfig& config, GuidanceBackend& backend,
        const LightingPool& pool, const OptimizeOptions& options = {});

std::string log_header();
std::string format_log_line(const IterationLog& entry);

struct BaselineResult {
    MaterialMaps maps;
    std::vector<uint8_t> uncovered;   // chart texels no canonical view sees
    double chart_coverage = 0.0;      // fraction of chart texels that received a color
};

inline const Vec3f kUncoveredColor{1.0f, 0.0f, 1.0f};

/// Per texel: the unoccluded canonical view with the largest n . view direction
/// supplies kc = sRGB-decoded reference color; km = 0, kr = 1.
BaselineResult backproject_baseline(const Mesh& mesh, const CanonicalSetup& setup,
        const ReferenceSet& reference, int resolution);

/// Orbiting camera at the equator under a fixed light; frame 0 is canonical view 0.
std::vector<RenderedImage> turntable(const Mesh& mesh, const MaterialField& field,
        const PrefilteredLight& light, int frames, int resolution, float fov_y = kDefaultFov);

/// Tone-mapped display image.
Image display(const RenderedImage& render);

} // namespace relitex

#endif // RELITEX_PIPELINE_HPP
