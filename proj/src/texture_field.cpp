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

#include <relitex/texture_field.hpp>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <random>

namespace relitex {

namespace {

constexpr uint32_t kPrimeY = 2654435761u;
constexpr uint32_t kPrimeZ = 805459861u;
constexpr size_t kChunk = 512;

template <typename T> T sigmoid_derivative_from_preactivation(T x) {
    const T s = sigmoid(x);
    return s * (T(1) - s);
}

} // namespace

double FieldConfig::growth_factor() const {
    if (levels <= 1) {
        return 1.0;
    }
    return std::exp((std::log(double(finest_resolution)) - std::log(double(base_resolution))) /
            double(levels - 1));
}

int FieldConfig::level_resolution(int level) const {
    return int(std::floor(double(base_resolution) * std::pow(growth_factor(), double(level)) + 1e-6));
}

void FieldConfig::validate() const {
    if (levels < 1 || levels > 32) {
        throw ConfigError("field levels must be in [1, 32]");
    }
    if (features_per_level < 1 || features_per_level > 8) {
        throw ConfigError("features per level must be in [1, 8]");
    }
    if (table_size_log2 < 4 || table_size_log2 > 26) {
        throw ConfigError("table_size_log2 must be in [4, 26]");
    }
    if (base_resolution < 2 || finest_resolution < base_resolution) {
        throw ConfigError("field resolutions must satisfy 2 <= base <= finest");
    }
    if (hidden_width < 1 || hidden_width > 256) {
        throw ConfigError("decoder hidden width must be in [1, 256]");
    }
}

template <typename T>
TextureFieldT<T>::TextureFieldT(const FieldConfig& config, uint64_t seed)
        : TextureFieldT(config, seed, true) {}

template <typename T>
TextureFieldT<T>::TextureFieldT(const FieldConfig& config, uint64_t seed, bool initialize)
        : mConfig(config) {
    mConfig.validate();
    const size_t table_rows = size_t(1) << mConfig.table_size_log2;
    size_t offset = 0;
    for (int l = 0; l < mConfig.levels; ++l) {
        const int res = mConfig.level_resolution(l);
        const size_t dense_rows = size_t(res + 1) * size_t(res + 1) * size_t(res + 1);
        const bool dense = dense_rows <= table_rows;
        mResolution.push_back(res);
        mDense.push_back(dense ? 1 : 0);
        mRows.push_back(dense ? dense_rows : table_rows);
        mLevelOffset.push_back(offset);
        offset += mRows.back() * size_t(mConfig.features_per_level);
    }
    mDecoderOffset = offset;
    const size_t decoder = size_t(hidden()) * feature_dim() + size_t(hidden()) +
            size_t(kOutputs) * hidden() + size_t(kOutputs);
    mParams.assign(offset + decoder, T(0));
    if (!initialize) {
        return;
    }
    std::mt19937_64 rng(mix_seed(seed, 0x6669656c64ULL));
    std::uniform_real_distribution<double> table_init(-1e-4, 1e-4);
    for (size_t i = 0; i < mDecoderOffset; ++i) {
        mParams[i] = T(table_init(rng));
    }
    std::normal_distribution<double> w1_init(0.0, std::sqrt(2.0 / double(feature_dim())));
    for (size_t i = 0; i < size_t(hidden()) * feature_dim(); ++i) {
        mParams[w1_offset() + i] = T(w1_init(rng));
    }
    std::normal_distribution<double> w2_init(0.0, std::sqrt(2.0 / double(hidden())));
    for (size_t i = 0; i < size_t(kOutputs) * hidden(); ++i) {
        mParams[w2_offset() + i] = T(w2_init(rng));
    }
}

template <typename T>
void TextureFieldT<T>::level_corners(int level, const Vec3<T>& p, uint32_t rows[8],
        T weights[8]) const {
    const int res = mResolution[size_t(level)];
    int cell[3];
    T frac[3];
    for (int a = 0; a < 3; ++a) {
        const T x = std::clamp((p[a] + T(1)) * T(0.5), T(0), T(1)) * T(res);
        const int i = std::min(int(std::floor(x)), res - 1);
        cell[a] = i;
        frac[a] = x - T(i);
    }
    const bool dense = mDense[size_t(level)] != 0;
    const uint32_t stride = uint32_t(res + 1);
    const uint32_t mask = uint32_t(mRows[size_t(level)] - 1);
    for (int c = 0; c < 8; ++c) {
        const uint32_t x = uint32_t(cell[0] + (c & 1));
        const uint32_t y = uint32_t(cell[1] + ((c >> 1) & 1));
        const uint32_t z = uint32_t(cell[2] + ((c >> 2) & 1));
        rows[c] = dense ? x + stride * (y + stride * z) : (x ^ (y * kPrimeY) ^ (z * kPrimeZ)) & mask;
        weights[c] = ((c & 1) ? frac[0] : T(1) - frac[0]) *
                (((c >> 1) & 1) ? frac[1] : T(1) - frac[1]) *
                (((c >> 2) & 1) ? frac[2] : T(1) - frac[2]);
    }
}

template <typename T>
void TextureFieldT<T>::encode(std::span<const Vec3<T>> points, std::span<T> features) const {
    const size_t dim = size_t(feature_dim());
    if (features.size() != points.size() * dim) {
        throw Error("encode: feature buffer has the wrong size");
    }
    const int fpl = mConfig.features_per_level;
    // Level-major order keeps one table hot in cache at a time.
    tbb::parallel_for(0, mConfig.levels, [&](int level) {
        const T* table = mParams.data() + mLevelOffset[size_t(level)];
        uint32_t rows[8];
        T weights[8];
        for (size_t i = 0; i < points.size(); ++i) {
            level_corners(level, points[i], rows, weights);
            T* out = features.data() + i * dim + size_t(level) * fpl;
            for (int f = 0; f < fpl; ++f) {
                T sum = T(0);
                for (int c = 0; c < 8; ++c) {
                    sum += weights[c] * table[size_t(rows[c]) * fpl + f];
                }
                out[f] = sum;
            }
        }
    });
}

template <typename T>
MaterialSampleT<T> TextureFieldT<T>::decode(std::span<const T> feature, T* hidden_out,
        T* outputs_out) const {
    const int dim = feature_dim();
    const int width = hidden();
    const T* w1 = mParams.data() + w1_offset();
    const T* b1 = mParams.data() + b1_offset();
    const T* w2 = mParams.data() + w2_offset();
    const T* b2 = mParams.data() + b2_offset();
    T local_hidden[256];
    T* h = hidden_out ? hidden_out : local_hidden;
    for (int k = 0; k < width; ++k) {
        T sum = b1[k];
        const T* row = w1 + size_t(k) * dim;
        for (int i = 0; i < dim; ++i) {
            sum += row[i] * feature[size_t(i)];
        }
        h[k] = sum;
    }
    T o[kOutputs];
    for (int j = 0; j < kOutputs; ++j) {
        T sum = b2[j];
        const T* row = w2 + size_t(j) * width;
        for (int k = 0; k < width; ++k) {
            sum += row[k] * std::max(h[k], T(0));
        }
        o[j] = sum;
        if (outputs_out) {
            outputs_out[j] = sum;
        }
    }
    MaterialSampleT<T> m;
    m.kc = Vec3<T>(sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2]));
    m.km = sigmoid(o[3]);
    m.kr = sigmoid(o[4]);
    m.kn = Vec3<T>(o[5], o[6], o[7]);
    return m;
}

template <typename T>
void TextureFieldT<T>::decode_backward(std::span<const T> feature, const T* h, const T* o,
        const MaterialGradT<T>& grad, std::span<T> param_grads, std::span<T> d_feature) const {
    const int dim = feature_dim();
    const int width = hidden();
    const T* w1 = mParams.data() + w1_offset();
    const T* w2 = mParams.data() + w2_offset();
    // param_grads is indexed relative to w1_offset().
    T* gw1 = param_grads.data();
    T* gb1 = gw1 + size_t(width) * dim;
    T* gw2 = gb1 + width;
    T* gb2 = gw2 + size_t(kOutputs) * width;

    const T upstream[kOutputs] = {grad.kc.x(), grad.kc.y(), grad.kc.z(), grad.km, grad.kr,
            grad.kn.x(), grad.kn.y(), grad.kn.z()};
    T d_o[kOutputs];
    for (int j = 0; j < kOutputs; ++j) {
        d_o[j] = j < 5 ? upstream[j] * sigmoid_derivative_from_preactivation(o[j]) : upstream[j];
    }
    T d_h[256];
    for (int k = 0; k < width; ++k) {
        d_h[k] = T(0);
    }
    for (int j = 0; j < kOutputs; ++j) {
        if (d_o[j] == T(0)) {
            continue;
        }
        gb2[j] += d_o[j];
        const T* row = w2 + size_t(j) * width;
        T* grow = gw2 + size_t(j) * width;
        for (int k = 0; k < width; ++k) {
            grow[k] += d_o[j] * std::max(h[k], T(0));
            d_h[k] += row[k] * d_o[j];
        }
    }
    for (int i = 0; i < dim; ++i) {
        d_feature[size_t(i)] = T(0);
    }
    for (int k = 0; k < width; ++k) {
        if (!(h[k] > T(0)) || d_h[k] == T(0)) {
            continue;
        }
        gb1[k] += d_h[k];
        const T* row = w1 + size_t(k) * dim;
        T* grow = gw1 + size_t(k) * dim;
        for (int i = 0; i < dim; ++i) {
            grow[i] += d_h[k] * feature[size_t(i)];
            d_feature[size_t(i)] += row[i] * d_h[k];
        }
    }
}

template <typename T>
void TextureFieldT<T>::forward(std::span<const Vec3<T>> points, std::span<MaterialSampleT<T>> out,
        FieldCache<T>* cache) const {
    if (out.size() != points.size()) {
        throw Error("field forward: output count does not match point count");
    }
    const size_t n = points.size();
    const size_t dim = size_t(feature_dim());
    FieldCache<T> local;
    FieldCache<T>& c = cache ? *cache : local;
    c.count = n;
    c.features.resize(n * dim);
    encode(points, c.features);
    if (cache) {
        c.hidden.resize(n * size_t(hidden()));
        c.outputs.resize(n * kOutputs);
    }
    tbb::parallel_for(tbb::blocked_range<size_t>(0, n, kChunk), [&](const tbb::blocked_range<size_t>& r) {
        for (size_t i = r.begin(); i != r.end(); ++i) {
            out[i] = decode(std::span<const T>(c.features.data() + i * dim, dim),
                    cache ? c.hidden.data() + i * size_t(hidden()) : nullptr,
                    cache ? c.outputs.data() + i * kOutputs : nullptr);
        }
    });
}

template <typename T>
void TextureFieldT<T>::backward(std::span<const Vec3<T>> points, const FieldCache<T>& cache,
        std::span<const MaterialGradT<T>> grads, std::span<T> param_grads) const {
    const size_t n = points.size();
    if (grads.size() != n || cache.count != n) {
        throw Error("field backward: " + std::to_string(n) + " points but " +
                std::to_string(grads.size()) + " gradients and " + std::to_string(cache.count) +
                " cached activations");
    }
    if (param_grads.size() != mParams.size()) {
        throw Error("field backward: gradient buffer has the wrong size");
    }
    const size_t dim = size_t(feature_dim());
    const size_t decoder_size = mParams.size() - mDecoderOffset;
    const size_t chunks = (n + kChunk - 1) / kChunk;

    // Decoder: fixed-size chunks, each with its own accumulator, reduced in chunk order
    // so the result does not depend on thread scheduling.
    std::vector<T> d_features(n * dim);
    std::vector<T> partial(chunks * decoder_size, T(0));
    tbb::parallel_for(size_t(0), chunks, [&](size_t chunk) {
        std::span<T> acc(partial.data() + chunk * decoder_size, decoder_size);
        const size_t end = std::min(n, (chunk + 1) * kChunk);
        for (size_t i = chunk * kChunk; i < end; ++i) {
            decode_backward(std::span<const T>(cache.features.data() + i * dim, dim),
                    cache.hidden.data() + i * size_t(hidden()), cache.outputs.data() + i * kOutputs,
                    grads[i], acc, std::span<T>(d_features.data() + i * dim, dim));
        }
    });
    T* decoder_grads = param_grads.data() + mDecoderOffset;
    for (size_t chunk = 0; chunk < chunks; ++chunk) {
        const T* acc = partial.data() + chunk * decoder_size;
        for (size_t k = 0; k < decoder_size; ++k) {
            decoder_grads[k] += acc[k];
        }
    }

    // Tables: each level is owned by one task and visits points in order.
    const int fpl = mConfig.features_per_level;
    tbb::parallel_for(0, mConfig.levels, [&](int level) {
        T* table_grads = param_grads.data() + mLevelOffset[size_t(level)];
        uint32_t rows[8];
        T weights[8];
        for (size_t i = 0; i < n; ++i) {
            const T* df = d_features.data() + i * dim + size_t(level) * fpl;
            bool any = false;
            for (int f = 0; f < fpl; ++f) {
                any = any || df[f] != T(0);
            }
            if (!any) {
                continue;
            }
            level_corners(level, points[i], rows, weights);
            for (int c = 0; c < 8; ++c) {
                T* g = table_grads + size_t(rows[c]) * fpl;
                for (int f = 0; f < fpl; ++f) {
                    g[f] += weights[c] * df[f];
                }
            }
        }
    });
}

template <typename T>
void TextureFieldT<T>::evaluate(std::span<const Vec3f> points, std::span<MaterialSample> out) const {
    if constexpr (std::is_same_v<T, float>) {
        forward(points, out);
    } else {
        std::vector<Vec3<T>> p(points.size());
        for (size_t i = 0; i < points.size(); ++i) {
            p[i] = points[i].cast<T>();
        }
        std::vector<MaterialSampleT<T>> m(points.size());
        forward(p, m);
        for (size_t i = 0; i < m.size(); ++i) {
            out[i].kc = m[i].kc.template cast<float>();
            out[i].km = float(m[i].km);
            out[i].kr = float(m[i].kr);
            out[i].kn = m[i].kn.template cast<float>();
        }
    }
}

template class TextureFieldT<float>;
template class TextureFieldT<double>;

void adam_step(OptimizerState& state, std::span<float> params, std::span<const float> grads) {
    if (params.size() != grads.size() || state.m.size() != params.size() ||
            state.v.size() != params.size()) {
        throw Error("adam_step: parameter, gradient and moment sizes differ");
    }
    for (size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("non-finite gradient at parameter " + std::to_string(i) + " (value " +
                    std::to_string(grads[i]) + ")");
        }
    }
    state.step += 1;
    const AdamConfig& c = state.config;
    const double correction1 = 1.0 - std::pow(c.beta1, double(state.step));
    const double correction2 = 1.0 - std::pow(c.beta2, double(state.step));
    const float b1 = float(c.beta1);
    const float b2 = float(c.beta2);
    const float step_size = float(c.lr / correction1);
    const float inv_sqrt_c2 = float(1.0 / std::sqrt(correction2));
    const float eps = float(c.epsilon);
    tbb::parallel_for(tbb::blocked_range<size_t>(0, params.size(), 1 << 16),
            [&](const tbb::blocked_range<size_t>& r) {
                for (size_t i = r.begin(); i != r.end(); ++i) {
                    const float g = grads[i];
                    state.m[i] = b1 * state.m[i] + (1.0f - b1) * g;
                    state.v[i] = b2 * state.v[i] + (1.0f - b2) * g * g;
                    params[i] -= step_size * state.m[i] / (std::sqrt(state.v[i]) * inv_sqrt_c2 + eps);
                }
            });
}

} // namespace relitex
