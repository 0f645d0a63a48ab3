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

#ifndef RELITEX_EQUIRECT_HPP
#define RELITEX_EQUIRECT_HPP

#include <relitex/image.hpp>
#include <relitex/math.hpp>

namespace relitex {

// Equirectangular convention: y is up, u = azimuth atan2(z, x) / 2pi wrapped to [0, 1),
// v = polar angle from +y / pi. Texel (i, j) is centered at ((i + .5) / W, (j + .5) / H).

template <typename T> struct EquirectCoord {
    T u = 0;
    T v = 0;
    Vec3<T> du_ddir = Vec3<T>::Zero();
    Vec3<T> dv_ddir = Vec3<T>::Zero();
};

/// Coordinates of a (not necessarily unit) direction after undoing a rotation about +y.
template <typename T>
EquirectCoord<T> equirect_coord(const Vec3<T>& d, T rotation, bool with_gradient) {
    EquirectCoord<T> out;
    const T rho2 = std::max(d.x() * d.x() + d.z() * d.z(), T(1e-24));
    const T rho = std::sqrt(rho2);
    T u = (std::atan2(d.z(), d.x()) - rotation) / T(kTwoPi);
    u -= std::floor(u);
    out.u = u;
    out.v = std::atan2(rho, d.y()) / T(kPi);
    if (with_gradient) {
        out.du_ddir = Vec3<T>(-d.z() / rho2, T(0), d.x() / rho2) / T(kTwoPi);
        const T r2 = rho2 + d.y() * d.y();
        out.dv_ddir = Vec3<T>(d.y() * d.x() / rho, -rho, d.y() * d.z() / rho) / (r2 * T(kPi));
    }
    return out;
}

inline Vec3f equirect_direction(float u, float v) {
    const float phi = float(kTwoPi) * u;
    const float theta = float(kPi) * v;
    return {std::sin(theta) * std::cos(phi), std::cos(theta), std::sin(theta) * std::sin(phi)};
}

inline Vec3f equirect_texel_direction(int x, int y, int width, int height) {
    return equirect_direction((float(x) + 0.5f) / float(width), (float(y) + 0.5f) / float(height));
}

/// Solid angle of an equirect texel in row y.
inline float equirect_texel_solid_angle(int y, int width, int height) {
    const double t0 = kPi * double(y) / double(height);
    const double t1 = kPi * double(y + 1) / double(height);
    return float(kTwoPi / double(width) * (std::cos(t0) - std::cos(t1)));
}

/// Bilinear lookup, u wraps and v clamps.
inline Vec3f sample_bilinear(const Image& map, float u, float v) {
    const float s = u * float(map.width) - 0.5f;
    const float t = v * float(map.height) - 0.5f;
    const float fs = std::floor(s);
    const float ft = std::floor(t);
    const float ws = s - fs;
    const float wt = t - ft;
    int x0 = int(fs) % map.width;
    if (x0 < 0) {
        x0 += map.width;
    }
    const int x1 = (x0 + 1) % map.width;
    const int y0 = std::clamp(int(ft), 0, map.height - 1);
    const int y1 = std::clamp(int(ft) + 1, 0, map.height - 1);
    Vec3f out = Vec3f::Zero();
    for (int c = 0; c < 3; ++c) {
        const float top = map.at(x0, y0, c) * (1.0f - ws) + map.at(x1, y0, c) * ws;
        const float bottom = map.at(x0, y1, c) * (1.0f - ws) + map.at(x1, y1, c) * ws;
        out[c] = top * (1.0f - wt) + bottom * wt;
    }
    return out;
}

// Quadratic B-spline reconstruction. It is C1 in the lookup coordinate, which keeps
// central finite differences of shaded pixels well behaved, and never overshoots.
template <typename T> struct BSplineTaps {
    int index[3];
    T weight[3];
    T derivative[3];
};

template <typename T> BSplineTaps<T> bspline_taps(T s) {
    BSplineTaps<T> taps;
    const T center = std::floor(s + T(0.5));
    const T f = s - center;
    const int i0 = int(center);
    taps.index[0] = i0 - 1;
    taps.index[1] = i0;
    taps.index[2] = i0 + 1;
    const T a = T(0.5) - f;
    const T b = T(0.5) + f;
    taps.weight[0] = T(0.5) * a * a;
    taps.weight[1] = T(0.75) - f * f;
    taps.weight[2] = T(0.5) * b * b;
    taps.derivative[0] = -a;
    taps.derivative[1] = T(-2) * f;
    taps.derivative[2] = b;
    return taps;
}

/// Value plus partial derivatives with respect to the two continuous texel coordinates.
template <typename T> struct MapSample {
    Vec3<T> value = Vec3<T>::Zero();
    Vec3<T> d_s = Vec3<T>::Zero();
    Vec3<T> d_t = Vec3<T>::Zero();
};

/// Quadratic B-spline sample of an RGB (or RG, zero-padded) map at texel-space
/// coordinates (s, t) where texel centers sit at integers. `wrap_s` selects periodic
/// behavior along s; t always clamps.
template <typename T>
MapSample<T> sample_bspline(const Image& map, T s, T t, bool wrap_s, bool with_gradient) {
    const BSplineTaps<T> tx = bspline_taps(s);
    const BSplineTaps<T> ty = bspline_taps(t);
    MapSample<T> out;
    const int channels = std::min(map.channels, 3);
    for (int j = 0; j < 3; ++j) {
        const int y = std::clamp(ty.index[j], 0, map.height - 1);
        Vec3<T> row = Vec3<T>::Zero();
        Vec3<T> row_ds = Vec3<T>::Zero();
        for (int i = 0; i < 3; ++i) {
            int x = tx.index[i];
            if (wrap_s) {
                x %= map.width;
                if (x < 0) {
                    x += map.width;
                }
            } else {
                x = std::clamp(x, 0, map.width - 1);
            }
            const float* texel = map.pixel(size_t(y) * map.width + x);
            for (int c = 0; c < channels; ++c) {
                row[c] += tx.weight[i] * T(texel[c]);
                if (with_gradient) {
                    row_ds[c] += tx.derivative[i] * T(texel[c]);
                }
            }
        }
        out.value += ty.weight[j] * row;
        if (with_gradient) {
            out.d_s += ty.weight[j] * row_ds;
            out.d_t += ty.derivative[j] * row;
        }
    }
    return out;
}

} // namespace relitex

#endif // RELITEX_EQUIRECT_HPP
