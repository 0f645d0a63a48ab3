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


#ifndef RELITEX_TEXTURE_FIELD_HPP
#define RELITEX_TEXTURE_FIELD_HPP

#include <relitex/error.hpp>
#include <relitex/geometry.hpp>
#include <relitex/image.hpp>
#include <relitex/math.hpp>
#include <relitex/renderer.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace relitex {

struct FieldConfig {
    int levels = 16;
    int features_per_level = 2;
    int table_size_log2 = 19;
    int base_resolution = 16;
    int finest_resolution = 2048;
    int hidden_width = 32;

    int feature_dim() const { return levels * features_per_level; }
    /// Per-level scale so that level L-1 reaches finest_resolution.
    double growth_factor() const;
    int level_resolution(int level) const;
    void validate() const;
    bool operator==(const FieldConfig&) const = default;
};

/// Activations kept by a forward pass for the matching backward pass.
template <typename T> struct FieldCache {
    size_t count = 0;
    std::vector<T> features;   // count x feature_dim
    std::vector<T> hidden;     // count x hidden_width, pre-activation
    std::vector<T> outputs;    // count x 8, pre-activation
};

/// Multi-resolution hash encoding followed by a two-layer decoder. All trainable values
/// live in one flat parameter vector: the per-level tables, then W1, b1, W2, b2.
template <typename T> class TextureFieldT : public MaterialField {
public:
    static constexpr int kOutputs = 8;   // kc(3), km, kr, kn(3)

    explicit TextureFieldT(const FieldConfig& config = {}, uint64_t seed = 0);

    const FieldConfig& config() const { return mConfig; }
    std::span<T> parameters() { return mParams; }
    std::span<const T> parameters() const { return mParams; }
    size_t parameter_count() const { return mParams.size(); }

    int level_resolution(int level) const { return mResolution[size_t(level)]; }
    /// Rows (feature vectors) in a level's table.
    size_t level_rows(int level) const { return mRows[size_t(level)]; }
    size_t level_offset(int level) const { return mLevelOffset[size_t(level)]; }
    bool level_is_dense(int level) const { return mDense[size_t(level)] != 0; }
    size_t table_parameter_count() const { return mDecoderOffset; }
    size_t w1_offset() const { return mDecoderOffset; }
    size_t b1_offset() const { return w1_offset() + size_t(hidden()) * feature_dim(); }
    size_t w2_offset() const { return b1_offset() + size_t(hidden()); }
    size_t b2_offset() const { return w2_offset() + size_t(kOutputs) * hidden(); }

    /// Table rows touched by point p at a level and their trilinear weights.
    void level_corners(int level, const Vec3<T>& p, uint32_t rows[8], T weights[8]) const;

    /// N x feature_dim features for N points; points are clamped to [-1, 1]^3.
    void encode(std::span<const Vec3<T>> points, std::span<T> features) const;

    /// Decoder for one feature vector. Optional outputs receive the pre-activations.
    MaterialSampleT<T> decode(std::span<const T> feature, T* hidden = nullptr,
            T* outputs = nullptr) const;

    /// Accumulates decoder parameter gradients into `param_grads`, which spans the decoder
    /// block only (W1, b1, W2, b2), and writes the feature gradient to `d_feature`.
    void decode_backward(std::span<const T> feature, const T* hidden, const T* outputs,
            const MaterialGradT<T>& grad, std::span<T> param_grads, std::span<T> d_feature) const;

    void forward(std::span<const Vec3<T>> points, std::span<MaterialSampleT<T>> out,
            FieldCache<T>* cache = nullptr) const;

    /// Accumulates dLoss/dparameters into `param_grads` (size parameter_count()).
    void backward(std::span<const Vec3<T>> points, const FieldCache<T>& cache,
            std::span<const MaterialGradT<T>> grads, std::span<T> param_grads) const;

    void evaluate(std::span<const Vec3f> points, std::span<MaterialSample> out) const override;

    template <typename U> TextureFieldT<U> cast() const {
        TextureFieldT<U> out(mConfig, 0, false);
        auto dst = out.parameters();
        for (size_t i = 0; i < mParams.size(); ++i) {
            dst[i] = U(mParams[i]);
        }
        return out;
    }

    /// Uninitialized (zero) parameters when `initialize` is false.
    TextureFieldT(const FieldConfig& config, uint64_t seed, bool initialize);

private:
    int hidden() const { return mConfig.hidden_width; }
    int feature_dim() const { return mConfig.feature_dim(); }

    FieldConfig mConfig;
    std::vector<int> mResolution;
    std::vector<size_t> mRows;
    std::vector<size_t> mLevelOffset;
    std::vector<uint8_t> mDense;
    size_t mDecoderOffset = 0;
    std::vector<T> mParams;
};

using TextureField = TextureFieldT<float>;

extern template class TextureFieldT<float>;
extern template class TextureFieldT<double>;

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double epsilon = 1e-8;
};

struct OptimizerState {
    AdamConfig config;
    std::vector<float> m;
    std::vector<float> v;
    int64_t step = 0;

    OptimizerState() = default;
    OptimizerState(size_t parameters, const AdamConfig& c)
            : config(c), m(parameters, 0.0f), v(parameters, 0.0f) {}
};

/// One bias-corrected Adam update. Throws NumericError (parameters untouched) when any
/// gradient is not finite.
void adam_step(OptimizerState& state, std::span<float> params, std::span<const float> grads);

/// UV-space material maps. kc is linear RGB, km/kr single channel, normal is a unit
/// tangent-space vector. Row 0 holds v = 1.
struct MaterialMaps {
    int resolution = 0;
    Image kc;
    Image km;
    Image kr;
    Image normal;
    /// 0 empty, 1 inside a chart, 2 filled by dilation.
    std::vector<uint8_t> coverage;
    size_t overlapping_texels = 0;
};

inline constexpr uint8_t kTexelEmpty = 0;
inline constexpr uint8_t kTexelChart = 1;
inline constexpr uint8_t kTexelDilated = 2;

struct UvTexel {
    uint32_t texel;
    uint32_t face;
    Vec3f barycentric;
};

/// Texels whose centers fall inside a UV triangle, last write wins on overlap.
std::vector<UvTexel> rasterize_uv(const Mesh& mesh, int resolution, size_t* overlapping = nullptr);

MaterialMaps bake_uv(const Mesh& mesh, const MaterialField& field, int resolution,
        int dilation = 4);

/// Grows the written region of every map by `texels` rings of neighbor averages.
void dilate_maps(MaterialMaps& maps, int texels);

/// Bilinear lookups of the maps at the gbuffer's covered-pixel UVs.
std::vector<MaterialSample> sample_material_maps(const MaterialMaps& maps, const GBuffer& gbuffer);

/// kc.png (8-bit sRGB), km.png and kr.png (8-bit linear), normal.png (16-bit RGB,
/// (n + 1) / 2 so that the neutral normal is (0.5, 0.5, 1)).
void write_material_maps(const std::filesystem::path& dir, const MaterialMaps& maps);
MaterialMaps read_material_maps(const std::filesystem::path& dir);
/// The same encoding as the PNG files, applied in memory.
MaterialMaps quantize_material_maps(const MaterialMaps& maps);

/// Little-endian binary: "RLXFIELD", u32 version, config, tensor count, shape table,
/// then all tensors as raw float32 in table order.
void save_checkpoint(const std::filesystem::path& path, const TextureField& field);
TextureField load_checkpoint(const std::filesystem::path& path);

} // namespace relitex

#endif // RELITEX_TEXTURE_FIELD_HPP
