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

#ifndef RELITEX_BRDF_HPP
#define RELITEX_BRDF_HPP

#include <relitex/math.hpp>

namespace relitex {

inline constexpr float kMinRoughness = 0.03f;
inline constexpr float kDielectricF0 = 0.04f;

template <typename T> T pow5(T x) {
    const T x2 = x * x;
    return x2 * x2 * x;
}

template <typename T> Vec3<T> fresnel_schlick(T cos_theta, const Vec3<T>& f0) {
    const T fc = pow5(T(1) - saturate(cos_theta));
    return f0 + (Vec3<T>::Ones() - f0) * fc;
}

/// GGX / Trowbridge-Reitz normal distribution with alpha = kr^2.
template <typename T> T ggx_distribution(T n_dot_h, T kr) {
    const T r = std::max(kr, T(kMinRoughness));
    const T a2 = r * r * r * r;
    const T c = saturate(n_dot_h);
    const T f = c * c * (a2 - T(1)) + T(1);
    return a2 / (T(kPi) * f * f);
}

/// Height-correlated Smith masking-shadowing G2 for GGX, alpha = kr^2.
template <typename T> T geometric_smith(T n_dot_v, T n_dot_l, T kr) {
    const T nv = saturate(n_dot_v);
    const T nl = saturate(n_dot_l);
    if (nv <= T(0) || nl <= T(0)) {
        return T(0);
    }
    const T r = std::max(kr, T(kMinRoughness));
    const T a2 = r * r * r * r;
    const T lv = nl * std::sqrt(a2 + (T(1) - a2) * nv * nv);
    const T ll = nv * std::sqrt(a2 + (T(1) - a2) * nl * nl);
    return T(2) * nv * nl / (lv + ll);
}

/// Half vector distributed as D(h)(n.h) around +z; `alpha` is the GGX width (kr^2).
inline Vec3f sample_ggx_half_vector(const Vec2f& u, float alpha) {
    const float phi = float(kTwoPi) * u.x();
    const float a2 = alpha * alpha;
    const float cos2 = (1.0f - u.y()) / (1.0f + (a2 - 1.0f) * u.y());
    const float cos_theta = std::sqrt(std::max(cos2, 0.0f));
    const float sin_theta = std::sqrt(std::max(1.0f - cos2, 0.0f));
    return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
}

inline Vec3f sample_cosine_hemisphere(const Vec2f& u) {
    const float phi = float(kTwoPi) * u.x();
    const float cos_theta = std::sqrt(1.0f - u.y());
    const float sin_theta = std::sqrt(u.y());
    return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
}

template <typename T> Vec3<T> reflect(const Vec3<T>& v, const Vec3<T>& n) {
    return T(2) * n.dot(v) * n - v;
}

} // namespace relitex

#endif // RELITEX_BRDF_HPP
