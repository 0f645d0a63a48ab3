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


#ifndef RELITEX_RENDERER_HPP
#define RELITEX_RENDERER_HPP

#include <relitex/envlight.hpp>
#include <relitex/geometry.hpp>
#include <relitex/image.hpp>
#include <relitex/math.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace relitex {

/// Linear radiance written to pixels that no triangle covers.
inline constexpr float kBackground = 0.5f;

struct Camera {
    Vec3f position{0.0f, 0.0f, 3.0f};
    Vec3f target = Vec3f::Zero();
    Vec3f up{0.0f, 1.0f, 0.0f};
    float fov_y = 0.785398163f;
    int width = 256;
    int height = 256;

    /// Camera on a sphere around `target`. Azimuth is measured like atan2(z, x), so
    /// rotating an orbit camera and an environment light by the same angle about +y
    /// leaves the picture unchanged.
    static Camera orbit(float azimuth, float elevation, float distance, float fov_y, int width,
            int height, const Vec3f& target = Vec3f::Zero());

    /// Distance at which a sphere of radius `radius` fits the vertical field of view
    /// with a small margin.
    static float framing_distance(float fov_y, float radius = 1.0f);

    /// Throws ConfigError on a degenerate camera.
    void validate() const;

    Vec3f forward() const { return (target - position).normalized(); }
    Vec3f right() const { return forward().cross(up).normalized(); }
    Vec3f true_up() const { return right().cross(forward()); }

    /// Continuous pixel coordinates (x right, y down) and view depth of a world point.
    /// Returns false when the point is behind the camera.
    bool project(const Vec3f& world, Vec2f& pixel, float& depth) const;
};

/// Per-pixel geometry for one camera. Arrays are indexed by y * width + x.
struct GBuffer {
    int width = 0;
    int height = 0;
    Camera camera;
    std::vector<uint8_t> mask;
    std::vector<float> depth;
    std::vector<int32_t> face;
    std::vector<Vec3f> position;
    std::vector<Vec3f> normal;
    std::vector<Vec3f> tangent;
    std::vector<Vec3f> bitangent;
    std::vector<Vec2f> uv;
    /// Covered pixel indices in scanline order; per-pixel material arrays follow it.
    std::vector<uint32_t> covered;

    size_t pixel_count() const { return size_t(width) * size_t(height); }
};

/// Depth-tested rasterization with perspective-correct attribute interpolation. Pixels
/// are sampled at their centers with a top-left fill rule; no face culling.
GBuffer rasterize(const Mesh& mesh, const Camera& camera);

template <typename T> struct MaterialSampleT {
    Vec3<T> kc = Vec3<T>::Constant(T(0.5));
    T km = T(0.5);
    T kr = T(0.5);
    Vec3<T> kn = Vec3<T>::Zero();
};
using MaterialSample = MaterialSampleT<float>;

/// Gradient with respect to each MaterialSample field.
template <typename T> struct MaterialGradT {
    Vec3<T> kc = Vec3<T>::Zero();
    T km = T(0);
    T kr = T(0);
    Vec3<T> kn = Vec3<T>::Zero();
};
using MaterialGrad = MaterialGradT<float>;

/// Shading frame and unit direction toward the eye.
template <typename T> struct ShadingPoint {
    Vec3<T> normal;
    Vec3<T> tangent;
    Vec3<T> bitangent;
    Vec3<T> view;
};

/// Tangent-space normal for a bump vector: normalize(0.5 tanh(kn.x), 0.5 tanh(kn.y), 1).
template <typename T> Vec3<T> tangent_space_normal(const Vec3<T>& kn) {
    return Vec3<T>(T(0.5) * std::tanh(kn.x()), T(0.5) * std::tanh(kn.y()), T(1)).normalized();
}

/// Split-sum radiance leaving a surface point toward the eye.
template <typename T>
Vec3<T> shade(const ShadingPoint<T>& point, const MaterialSampleT<T>& material,
        const PrefilteredLight& light);

/// Gradient of dot(upstream, shade(...)) with respect to the material.
template <typename T>
MaterialGradT<T> shade_backward(const ShadingPoint<T>& point, const MaterialSampleT<T>& material,
        const PrefilteredLight& light, const Vec3<T>& upstream);

template <typename T> ShadingPoint<T> shading_point(const GBuffer& gbuffer, uint32_t pixel);

template <typename T> struct RenderedImageT {
    ImageT<T> pixels;             // linear RGB
    std::vector<uint8_t> mask;    // 1 where covered
};
using RenderedImage = RenderedImageT<float>;

/// Shades every covered pixel; `materials` follows gbuffer.covered.
template <typename T>
RenderedImageT<T> shade_image(const GBuffer& gbuffer, std::span<const MaterialSampleT<T>> materials,
        const PrefilteredLight& light);

/// Per-covered-pixel material gradients for upstream dLoss/dpixel (same shape as the
/// image). Visibility is held fixed.
template <typename T>
std::vector<MaterialGradT<T>> shade_image_backward(const GBuffer& gbuffer,
        std::span<const MaterialSampleT<T>> materials, const PrefilteredLight& light,
        const ImageT<T>& pixel_gradients);

/// Anything that can be queried for materials at 3D points in [-1, 1]^3.
class MaterialField {
public:
    virtual ~MaterialField() = default;
    virtual void evaluate(std::span<const Vec3f> points, std::span<MaterialSample> out) const = 0;
};

/// rasterize, query the field at covered pixels, shade.
RenderedImage render(const Mesh& mesh, const MaterialField& field, const PrefilteredLight& light,
        const Camera& camera);
RenderedImage render(const GBuffer& gbuffer, const MaterialField& field,
        const PrefilteredLight& light);

/// World positions of the covered pixels in gbuffer.covered order.
std::vector<Vec3f> covered_positions(const GBuffer& gbuffer);

} // namespace relitex

#endif // RELITEX_RENDERER_HPP
