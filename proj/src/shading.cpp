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

#include <relitex/renderer.hpp>

#include <relitex/brdf.hpp>
#include <relitex/error.hpp>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace relitex {

namespace {

// Intermediate quantities shared by the forward and backward passes.
template <typename T> struct ShadeTerms {
    Vec3<T> tanh_kn;
    Vec3<T> m;          // unnormalized perturbed normal
    T m_len;
    Vec3<T> n;          // perturbed normal
    T n_dot_v;
    Vec3<T> r;
    Vec3<T> irradiance;
    Mat3<T> d_irradiance;
    Vec3<T> specular;
    Mat3<T> d_specular;
    Vec3<T> d_specular_kr;
    Vec2<T> ab;
    Vec2<T> d_ab_nv;
    Vec2<T> d_ab_kr;
    Vec3<T> f0;
    Vec3<T> diffuse_albedo;
    Vec3<T> specular_weight;   // F0 * A + B
};

template <typename T>
ShadeTerms<T> evaluate_terms(const ShadingPoint<T>& point, const MaterialSampleT<T>& mat,
        const PrefilteredLight& light, bool gradients) {
    ShadeTerms<T> s;
    s.tanh_kn = Vec3<T>(std::tanh(mat.kn.x()), std::tanh(mat.kn.y()), T(0));
    s.m = point.tangent * (T(0.5) * s.tanh_kn.x()) + point.bitangent * (T(0.5) * s.tanh_kn.y()) +
            point.normal;
    s.m_len = s.m.norm();
    s.n = s.m / s.m_len;
    s.n_dot_v = s.n.dot(point.view);
    s.r = T(2) * s.n_dot_v * s.n - point.view;
    s.irradiance = light.irradiance<T>(s.n, gradients ? &s.d_irradiance : nullptr);
    s.specular = light.specular<T>(s.r, mat.kr, gradients ? &s.d_specular : nullptr,
            gradients ? &s.d_specular_kr : nullptr);
    s.ab = light.brdf<T>(s.n_dot_v, mat.kr, gradients ? &s.d_ab_nv : nullptr,
            gradients ? &s.d_ab_kr : nullptr);
    if (gradients && !(s.n_dot_v > T(0) && s.n_dot_v < T(1))) {
        s.d_ab_nv.setZero();
    }
    if (gradients && !(mat.kr > T(0) && mat.kr < T(1))) {
        s.d_ab_kr.setZero();
        s.d_specular_kr.setZero();
    }
    s.f0 = Vec3<T>::Constant(T(kDielectricF0) * (T(1) - mat.km)) + mat.kc * mat.km;
    s.diffuse_albedo = mat.kc * (T(1) - mat.km);
    s.specular_weight = s.f0 * s.ab.x() + Vec3<T>::Constant(s.ab.y());
    return s;
}

} // namespace

template <typename T>
Vec3<T> shade(const ShadingPoint<T>& point, const MaterialSampleT<T>& material,
        const PrefilteredLight& light) {
    const ShadeTerms<T> s = evaluate_terms(point, material, light, false);
    return s.diffuse_albedo.cwiseProduct(s.irradiance) + s.specular.cwiseProduct(s.specular_weight);
}

template <typename T>
MaterialGradT<T> shade_backward(const ShadingPoint<T>& point, const MaterialSampleT<T>& material,
        const PrefilteredLight& light, const Vec3<T>& g) {
    MaterialGradT<T> out;
    if (g.isZero()) {
        return out;
    }
    const ShadeTerms<T> s = evaluate_terms(point, material, light, true);
    const Vec3<T> g_spec = g.cwiseProduct(s.specular);   // upstream times prefiltered radiance

    out.kc = (T(1) - material.km) * g.cwiseProduct(s.irradiance) +
            (material.km * s.ab.x()) * g_spec;
    out.km = -g.dot(material.kc.cwiseProduct(s.irradiance)) +
            s.ab.x() * g_spec.dot(material.kc - Vec3<T>::Constant(T(kDielectricF0)));
    out.kr = g.dot(s.d_specular_kr.cwiseProduct(s.specular_weight)) +
            g_spec.dot(s.f0 * s.d_ab_kr.x() + Vec3<T>::Constant(s.d_ab_kr.y()));

    // Perturbed normal: irradiance lookup, reflection direction and n.v.
    Vec3<T> g_n = s.d_irradiance.transpose() * g.cwiseProduct(s.diffuse_albedo);
    const Vec3<T> g_r = s.d_specular.transpose() * g.cwiseProduct(s.specular_weight);
    const T g_nv = g_spec.dot(s.f0 * s.d_ab_nv.x() + Vec3<T>::Constant(s.d_ab_nv.y()));
    g_n += T(2) * (point.view * s.n.dot(g_r) + s.n_dot_v * g_r);
    g_n += g_nv * point.view;

    const Vec3<T> g_m = (g_n - s.n * s.n.dot(g_n)) / s.m_len;
    out.kn.x() = g_m.dot(point.tangent) * T(0.5) * (T(1) - s.tanh_kn.x() * s.tanh_kn.x());
    out.kn.y() = g_m.dot(point.bitangent) * T(0.5) * (T(1) - s.tanh_kn.y() * s.tanh_kn.y());
    out.kn.z() = T(0);
    return out;
}

template <typename T> ShadingPoint<T> shading_point(const GBuffer& gbuffer, uint32_t pixel) {
    ShadingPoint<T> p;
    p.normal = gbuffer.normal[pixel].cast<T>();
    p.tangent = gbuffer.tangent[pixel].cast<T>();
    p.bitangent = gbuffer.bitangent[pixel].cast<T>();
    p.view = (gbuffer.camera.position.cast<T>() - gbuffer.position[pixel].cast<T>()).normalized();
    return p;
}

namespace {

void check_inputs(const GBuffer& gbuffer, size_t materials, const PrefilteredLight& light) {
    if (!light.valid()) {
        throw Error("shade: light has no prefiltered products");
    }
    if (materials != gbuffer.covered.size()) {
        throw Error("shade: expected " + std::to_string(gbuffer.covered.size()) +
                " materials, got " + std::to_string(materials));
    }
}

template <typename Fn> void for_each_covered(size_t count, Fn&& fn) {
    tbb::parallel_for(tbb::blocked_range<size_t>(0, count, 256),
            [&](const tbb::blocked_range<size_t>& r) {
                for (size_t i = r.begin(); i != r.end(); ++i) {
                    fn(i);
                }
            });
}

} // namespace

template <typename T>
RenderedImageT<T> shade_image(const GBuffer& gbuffer, std::span<const MaterialSampleT<T>> materials,
        const PrefilteredLight& light) {
    check_inputs(gbuffer, materials.size(), light);
    RenderedImageT<T> out;
    out.pixels = ImageT<T>(gbuffer.width, gbuffer.height, 3, T(kBackground));
    out.mask = gbuffer.mask;
    for_each_covered(gbuffer.covered.size(), [&](size_t i) {
        const uint32_t idx = gbuffer.covered[i];
        const Vec3<T> c = shade<T>(shading_point<T>(gbuffer, idx), materials[i], light);
        T* px = out.pixels.pixel(idx);
        px[0] = c[0];
        px[1] = c[1];
        px[2] = c[2];
    });
    return out;
}

template <typename T>
std::vector<MaterialGradT<T>> shade_image_backward(const GBuffer& gbuffer,
        std::span<const MaterialSampleT<T>> materials, const PrefilteredLight& light,
        const ImageT<T>& pixel_gradients) {
    check_inputs(gbuffer, materials.size(), light);
    if (pixel_gradients.width != gbuffer.width || pixel_gradients.height != gbuffer.height ||
            pixel_gradients.channels != 3) {
        throw Error("shade_backward: gradient image shape does not match the gbuffer");
    }
    std::vector<MaterialGradT<T>> out(materials.size());
    for_each_covered(gbuffer.covered.size(), [&](size_t i) {
        const uint32_t idx = gbuffer.covered[i];
        const T* g = pixel_gradients.pixel(idx);
        out[i] = shade_backward<T>(shading_point<T>(gbuffer, idx), materials[i], light,
                Vec3<T>(g[0], g[1], g[2]));
    });
    return out;
}

RenderedImage render(const GBuffer& gbuffer, const MaterialField& field,
        const PrefilteredLight& light) {
    const std::vector<Vec3f> points = covered_positions(gbuffer);
    std::vector<MaterialSample> materials(points.size());
    field.evaluate(points, materials);
    return shade_image<float>(gbuffer, materials, light);
}

RenderedImage render(const Mesh& mesh, const MaterialField& field, const PrefilteredLight& light,
        const Camera& camera) {
    return render(rasterize(mesh, camera), field, light);
}

#define RELITEX_INSTANTIATE_SHADING(T)                                                            \
    template Vec3<T> shade<T>(const ShadingPoint<T>&, const MaterialSampleT<T>&,                  \
            const PrefilteredLight&);                                                             \
    template MaterialGradT<T> shade_backward<T>(const ShadingPoint<T>&, const MaterialSampleT<T>&, \
            const PrefilteredLight&, const Vec3<T>&);                                             \
    template ShadingPoint<T> shading_point<T>(const GBuffer&, uint32_t);                          \
    template RenderedImageT<T> shade_image<T>(const GBuffer&, std::span<const MaterialSampleT<T>>, \
            const PrefilteredLight&);                                                             \
    template std::vector<MaterialGradT<T>> shade_image_backward<T>(const GBuffer&,                \
            std::span<const MaterialSampleT<T>>, const PrefilteredLight&, const ImageT<T>&);

RELITEX_INSTANTIATE_SHADING(float)
RELITEX_INSTANTIATE_SHADING(double)

} // namespace relitex
