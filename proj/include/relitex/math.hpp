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

#ifndef RELITEX_MATH_HPP
#define RELITEX_MATH_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace relitex {

template <typename T> using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T> using Mat3 = Eigen::Matrix<T, 3, 3>;

using Vec2f = Vec2<float>;
using Vec3f = Vec3<float>;
using Vec3d = Vec3<double>;
using Mat3f = Mat3<float>;
using Mat4f = Eigen::Matrix4f;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <typename T> constexpr T saturate(T x) { return std::clamp(x, T(0), T(1)); }

template <typename T> T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }

// Rotation about +y that increases azimuth atan2(z, x) by `angle`.
template <typename T> Vec3<T> rotate_about_up(const Vec3<T>& d, T angle) {
    const T c = std::cos(angle);
    const T s = std::sin(angle);
    return {c * d.x() - s * d.z(), d.y(), s * d.x() + c * d.z()};
}

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr uint64_t mix_seed(uint64_t a, uint64_t b) { return mix_seed(a ^ mix_seed(b)); }

// Radical inverse in base 2.
inline float van_der_corput(uint32_t bits) {
    bits = (bits << 16u) | (bits >> 16u);
    bits = ((bits & 0x55555555u) << 1u) | ((bits & 0xAAAAAAAAu) >> 1u);
    bits = ((bits & 0x33333333u) << 2u) | ((bits & 0xCCCCCCCCu) >> 2u);
    bits = ((bits & 0x0F0F0F0Fu) << 4u) | ((bits & 0xF0F0F0F0u) >> 4u);
    bits = ((bits & 0x00FF00FFu) << 8u) | ((bits & 0xFF00FF00u) >> 8u);
    return float(bits) * 2.3283064365386963e-10f;
}

inline Vec2f hammersley(uint32_t i, uint32_t count) {
    return {(float(i) + 0.5f) / float(count), van_der_corput(i)};
}

// Orthonormal basis around a unit vector (Duff et al. branchless construction).
template <typename T> void orthonormal_basis(const Vec3<T>& n, Vec3<T>& t, Vec3<T>& b) {
    const T sign = std::copysign(T(1), n.z());
    const T a = T(-1) / (sign + n.z());
    const T c = n.x() * n.y() * a;
    t = Vec3<T>(T(1) + sign * n.x() * n.x() * a, sign * c, -sign * n.x());
    b = Vec3<T>(c, sign + n.y() * n.y() * a, -n.y());
}

} // namespace relitex

#endif // RELITEX_MATH_HPP
