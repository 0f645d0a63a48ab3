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

#include <relitex/pipeline.hpp>

namespace relitex {

BaselineResult backproject_baseline(const Mesh& mesh, const CanonicalSetup& setup,
        const ReferenceSet& reference, int resolution) {
    BaselineResult result;
    MaterialMaps& maps = result.maps;
    maps.resolution = resolution;
    maps.kc = Image(resolution, resolution, 3, 0.0f);
    maps.km = Image(resolution, resolution, 1, 0.0f);
    maps.kr = Image(resolution, resolution, 1, 1.0f);
    maps.normal = Image(resolution, resolution, 3, 0.0f);
    maps.coverage.assign(maps.kc.pixel_count(), kTexelEmpty);
    result.uncovered.assign(maps.kc.pixel_count(), 0);
    for (size_t i = 0; i < maps.normal.pixel_count(); ++i) {
        maps.normal.pixel(i)[2] = 1.0f;
    }

    const std::vector<UvTexel> texels = rasterize_uv(mesh, resolution, &maps.overlapping_texels);
    size_t colored = 0;
    for (const UvTexel& texel : texels) {
        const SurfacePoint sp = surface_point(mesh, texel.face, texel.barycentric);
        int best_view = -1;
        float best_cos = 0.0f;
        size_t best_pixel = 0;
        for (size_t v = 0; v < 4; ++v) {
            const GBuffer& g = setup.gbuffers[v];
            const Camera& camera = setup.cameras[v];
            const Vec3f to_camera = (camera.position - sp.position).normalized();
            const float cos_view = sp.normal.dot(to_camera);
            if (cos_view <= best_cos) {
                continue;
            }
            Vec2f pixel;
            float depth = 0.0f;
            if (!camera.project(sp.position, pixel, depth)) {
                continue;
            }
            const int px = int(std::floor(pixel.x()));
            const int py = int(std::floor(pixel.y()));
            if (px < 0 || py < 0 || px >= g.width || py >= g.height) {
                continue;
            }
            const size_t idx = size_t(py) * g.width + px;
            // Visible when the rasterized surface at that pixel is this surface.
            if (!g.mask[idx] || std::abs(g.depth[idx] - depth) > 0.02f * depth) {
                continue;
            }
            best_view = int(v);
            best_cos = cos_view;
            best_pixel = idx;
        }
        maps.coverage[texel.texel] = kTexelChart;
        float* kc = maps.kc.pixel(texel.texel);
        if (best_view < 0) {
            result.uncovered[texel.texel] = 1;
            for (int c = 0; c < 3; ++c) {
                kc[c] = kUncoveredColor[c];
            }
            continue;
        }
        ++colored;
        const float* ref = reference.views[size_t(best_view)].pixel(best_pixel);
        for (int c = 0; c < 3; ++c) {
            kc[c] = srgb_decode(saturate(ref[c]));
        }
    }
    result.chart_coverage = texels.empty() ? 0.0 : double(colored) / double(texels.size());
    dilate_maps(maps, 4);
    return result;
}

std::vector<RenderedImage> turntable(const Mesh& mesh, const MaterialField& field,
        const PrefilteredLight& light, int frames, int resolution, float fov_y) {
    if (frames < 1) {
        throw ConfigError("turntable needs at least one frame");
    }
    const float distance = Camera::framing_distance(fov_y);
    std::vector<RenderedImage> out;
    for (int f = 0; f < frames; ++f) {
        const float azimuth = float(kTwoPi) * float(f) / float(frames);
        out.push_back(render(mesh, field, light,
                Camera::orbit(azimuth, 0.0f, distance, fov_y, resolution, resolution)));
    }
    return out;
}

} // namespace relitex
