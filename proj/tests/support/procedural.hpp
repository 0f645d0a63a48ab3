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


#ifndef RELITEX_TESTS_PROCEDURAL_HPP
#define RELITEX_TESTS_PROCEDURAL_HPP

#include <relitex/guidance.hpp>
#include <relitex/pipeline.hpp>
#include <relitex/renderer.hpp>

namespace relitex::testing {

/// Smooth analytic material field used as ground truth.
class ProceduralField final : public MaterialField {
public:
    MaterialSample at(const Vec3f& p) const {
        MaterialSample m;
        m.kc = Vec3f(0.55f + 0.35f * std::sin(2.7f * p.x() + 0.6f) * std::cos(1.9f * p.y()),
                0.45f + 0.30f * std::sin(2.1f * p.y() - 1.3f * p.z() + 0.4f),
                0.40f + 0.30f * std::cos(2.4f * p.z() + 0.9f * p.x()));
        m.km = saturate(0.5f + 0.6f * std::sin(2.2f * p.y() + 1.7f * p.x()));
        m.kr = 0.55f + 0.3f * std::cos(1.8f * p.z() - 2.0f * p.y());
        m.kn = Vec3f::Zero();
        return m;
    }

    void evaluate(std::span<const Vec3f> points, std::span<MaterialSample> out) const override {
        for (size_t i = 0; i < points.size(); ++i) {
            out[i] = at(points[i]);
        }
    }
};

/// Same material everywhere.
class ConstantField final : public MaterialField {
public:
    explicit ConstantField(const MaterialSample& m) : mMaterial(m) {}
    void evaluate(std::span<const Vec3f>, std::span<MaterialSample> out) const override {
        std::fill(out.begin(), out.end(), mMaterial);
    }

private:
    MaterialSample mMaterial;
};

/// Stub targets: display-space renders of `truth` seen through each request's cameras
/// and lights (a 2x2 grid when the request carries four views).
inline StubBackend::TargetProvider ground_truth_targets(const Mesh& mesh, const MaterialField& truth) {
    return [&mesh, &truth](const GuidanceRequest& request) {
        std::vector<Image> tiles;
        for (const ViewContext& view : request.views) {
            tiles.push_back(display(render(mesh, truth, view.light, view.camera)));
        }
        if (tiles.size() == 4) {
            return assemble_grid(tiles);
        }
        return tiles.at(0);
    };
}

} // namespace relitex::testing

#endif // RELITEX_TESTS_PROCEDURAL_HPP
