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

#include <random>

namespace relitex {

namespace {

constexpr double kBlurTaps[5] = {1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0};

// Separable 5-tap binomial blur with clamped borders along x (axis 0) or y (axis 1).
template <typename T> ImageT<T> blur(const ImageT<T>& in, int axis) {
    ImageT<T> out(in.width, in.height, in.channels);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            for (int k = -2; k <= 2; ++k) {
                const int sx = axis == 0 ? std::clamp(x + k, 0, in.width - 1) : x;
                const int sy = axis == 1 ? std::clamp(y + k, 0, in.height - 1) : y;
                const T w = T(kBlurTaps[k + 2]);
                for (int c = 0; c < in.channels; ++c) {
                    out.at(x, y, c) += w * in.at(sx, sy, c);
                }
            }
        }
    }
    return out;
}

// Adjoint of blur(): scatters each output back onto the taps that produced it.
template <typename T> ImageT<T> blur_adjoint(const ImageT<T>& g, int axis) {
    ImageT<T> out(g.width, g.height, g.channels);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            for (int k = -2; k <= 2; ++k) {
                const int sx = axis == 0 ? std::clamp(x + k, 0, g.width - 1) : x;
                const int sy = axis == 1 ? std::clamp(y + k, 0, g.height - 1) : y;
                const T w = T(kBlurTaps[k + 2]);
                for (int c = 0; c < g.channels; ++c) {
                    out.at(sx, sy, c) += w * g.at(x, y, c);
                }
            }
        }
    }
    return out;
}

template <typename T> ImageT<T> decimate(const ImageT<T>& in) {
    ImageT<T> out((in.width + 1) / 2, (in.height + 1) / 2, in.channels);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < in.channels; ++c) {
                out.at(x, y, c) = in.at(2 * x, 2 * y, c);
            }
        }
    }
    return out;
}

template <typename T> ImageT<T> decimate_adjoint(const ImageT<T>& g, int width, int height) {
    ImageT<T> out(width, height, g.channels);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            for (int c = 0; c < g.channels; ++c) {
                out.at(2 * x, 2 * y, c) = g.at(x, y, c);
            }
        }
    }
    return out;
}

template <typename T> ImageT<T> pyramid_down(const ImageT<T>& in) {
    return decimate(blur(blur(in, 0), 1));
}

template <typename T> ImageT<T> pyramid_down_adjoint(const ImageT<T>& g, int width, int height) {
    return blur_adjoint(blur_adjoint(decimate_adjoint(g, width, height), 1), 0);
}

template <typename T> T sign(T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); }

} // namespace

template <typename T>
ImageLoss<T> recon_loss(const ImageT<T>& render, const ImageT<T>& reference,
        std::span<const uint8_t> mask) {
    if (!render.same_shape(reference)) {
        throw ConfigError("recon_loss: render and reference shapes differ");
    }
    if (!mask.empty() && mask.size() != render.pixel_count()) {
        throw ConfigError("recon_loss: mask size does not match the image");
    }
    ImageLoss<T> loss;
    loss.gradient = ImageT<T>(render.width, render.height, render.channels);
    size_t covered = 0;
    for (size_t i = 0; i < render.pixel_count(); ++i) {
        covered += (mask.empty() || mask[i]) ? 1 : 0;
    }
    if (covered == 0) {
        return loss;
    }
    const int channels = render.channels;
    const T n = T(covered);

    const T l2_norm = T(1) / (T(channels) * n);
    for (size_t i = 0; i < render.pixel_count(); ++i) {
        if (!mask.empty() && !mask[i]) {
            continue;
        }
        for (int c = 0; c < channels; ++c) {
            const size_t k = i * size_t(channels) + size_t(c);
            const T d = render.pixels[k] - reference.pixels[k];
            loss.l2 += d * d * l2_norm;
            loss.gradient.pixels[k] += T(2) * d * l2_norm;
        }
    }

    std::array<ImageT<T>, kPyramidLevels> xs;
    std::array<ImageT<T>, kPyramidLevels> rs;
    xs[0] = render;
    rs[0] = reference;
    for (int k = 1; k < kPyramidLevels; ++k) {
        xs[size_t(k)] = pyramid_down(xs[size_t(k - 1)]);
        rs[size_t(k)] = pyramid_down(rs[size_t(k - 1)]);
    }
    std::array<ImageT<T>, kPyramidLevels> gs;
    for (int k = 0; k < kPyramidLevels; ++k) {
        const ImageT<T>& x = xs[size_t(k)];
        const ImageT<T>& r = rs[size_t(k)];
        // Each level is normalized by the covered count at its scale, then the levels
        // are averaged.
        const T norm = T(1) / (T(kPyramidLevels) * T(channels) * n / T(1 << (2 * k)));
        gs[size_t(k)] = ImageT<T>(x.width, x.height, channels);
        for (size_t i = 0; i < x.pixels.size(); ++i) {
            const T d = x.pixels[i] - r.pixels[i];
            loss.perceptual += std::abs(d) * norm;
            gs[size_t(k)].pixels[i] = sign(d) * norm;
        }
    }
    for (int k = kPyramidLevels - 1; k > 0; --k) {
        const ImageT<T> down = pyramid_down_adjoint(gs[size_t(k)], xs[size_t(k - 1)].width,
                xs[size_t(k - 1)].height);
        for (size_t i = 0; i < down.pixels.size(); ++i) {
            gs[size_t(k - 1)].pixels[i] += down.pixels[i];
        }
    }
    for (size_t i = 0; i < loss.gradient.pixels.size(); ++i) {
        loss.gradient.pixels[i] += gs[0].pixels[i];
    }
    loss.value = loss.l2 + loss.perceptual;
    return loss;
}

template ImageLoss<float> recon_loss<float>(const ImageT<float>&, const ImageT<float>&,
        std::span<const uint8_t>);
template ImageLoss<double> recon_loss<double>(const ImageT<double>&, const ImageT<double>&,
        std::span<const uint8_t>);

RegLoss smoothness_reg(const MaterialField& field, const Mesh& mesh, int samples, double epsilon,
        uint64_t seed) {
    if (samples < 1) {
        throw ConfigError("smoothness_reg needs at least one sample");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("smoothness_reg epsilon must be positive");
    }
    const std::vector<SurfacePoint> surface = sample_surface(mesh, size_t(samples), seed);
    std::mt19937_64 rng(mix_seed(seed, 0x726567ULL));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    RegLoss reg;
    reg.points.reserve(2 * surface.size());
    for (const SurfacePoint& sp : surface) {
        Vec3d e;
        do {
            e = Vec3d(unit(rng), unit(rng), unit(rng));
        } while (e.squaredNorm() > 1.0);
        Vec3f offset = (e * epsilon).cast<float>();
        offset -= sp.normal * sp.normal.dot(offset);
        reg.points.push_back(sp.position);
        reg.points.push_back(sp.position + offset);
    }
    std::vector<MaterialSample> materials(reg.points.size());
    field.evaluate(reg.points, materials);
    reg.gradients.assign(reg.points.size(), MaterialGrad{});
    const float inv = 1.0f / float(surface.size());
    double total = 0.0;
    for (size_t s = 0; s < surface.size(); ++s) {
        const Vec3f d = materials[2 * s].kc - materials[2 * s + 1].kc;
        total += double(d.cwiseAbs().sum());
        const Vec3f g = d.unaryExpr([](float v) { return sign(v); }) * inv;
        reg.gradients[2 * s].kc = g;
        reg.gradients[2 * s + 1].kc = -g;
    }
    reg.value = total / double(surface.size());
    return reg;
}

} // namespace relitex
