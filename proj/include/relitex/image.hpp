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

#ifndef RELITEX_IMAGE_HPP
#define RELITEX_IMAGE_HPP

#include <relitex/math.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace relitex {

/// Interleaved, row-major image; row 0 is the top of the picture.
template <typename T> struct ImageT {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<T> pixels;

    ImageT() = default;
    ImageT(int w, int h, int c, T fill = T(0))
            : width(w), height(h), channels(c), pixels(size_t(w) * size_t(h) * size_t(c), fill) {}

    size_t pixel_count() const { return size_t(width) * size_t(height); }
    bool empty() const { return pixels.empty(); }
    bool same_shape(const ImageT& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    T& at(int x, int y, int c) { return pixels[(size_t(y) * width + x) * channels + c]; }
    T at(int x, int y, int c) const { return pixels[(size_t(y) * width + x) * channels + c]; }

    T* pixel(size_t index) { return pixels.data() + index * channels; }
    const T* pixel(size_t index) const { return pixels.data() + index * channels; }

    template <typename U> ImageT<U> cast() const {
        ImageT<U> out(width, height, channels);
        std::transform(pixels.begin(), pixels.end(), out.pixels.begin(),
                [](T v) { return U(v); });
        return out;
    }

    bool operator==(const ImageT&) const = default;
};

using Image = ImageT<float>;

// Display transform applied to every image exchanged with guidance: x/(1+x) then sRGB.
template <typename T> T srgb_encode(T c) {
    if (c <= T(0.0031308)) {
        return T(12.92) * c;
    }
    return T(1.055) * std::pow(c, T(1.0 / 2.4)) - T(0.055);
}

template <typename T> T srgb_encode_derivative(T c) {
    if (c <= T(0.0031308)) {
        return T(12.92);
    }
    return T(1.055 / 2.4) * std::pow(c, T(1.0 / 2.4 - 1.0));
}

template <typename T> T srgb_decode(T c) {
    if (c <= T(0.04045)) {
        return c / T(12.92);
    }
    return std::pow((c + T(0.055)) / T(1.055), T(2.4));
}

template <typename T> T tonemap(T x) {
    x = std::max(x, T(0));
    return srgb_encode(x / (T(1) + x));
}

template <typename T> T tonemap_derivative(T x) {
    x = std::max(x, T(0));
    const T r = x / (T(1) + x);
    return srgb_encode_derivative(r) / ((T(1) + x) * (T(1) + x));
}

template <typename T> T inverse_tonemap(T y) {
    const T r = std::min(srgb_decode(saturate(y)), T(0.999));
    return r / (T(1) - r);
}

template <typename T> ImageT<T> tonemap_image(const ImageT<T>& hdr) {
    ImageT<T> out = hdr;
    for (T& v : out.pixels) {
        v = tonemap(v);
    }
    return out;
}

/// Rec. 709 luminance of an RGB image as a single-channel image.
Image luminance(const Image& rgb);

/// PSNR in dB with a peak of 1. When `mask` is non-empty only pixels with a nonzero
/// mask entry contribute.
double psnr(const Image& a, const Image& b, std::span<const uint8_t> mask = {});

double mean_abs_difference(const Image& a, const Image& b, std::span<const uint8_t> mask = {});

/// Box-filter resample by an integer factor.
Image downsample(const Image& image, int factor);

// PNG I/O. Values are written as round(clamp(v, 0, 1) * max) with no gamma conversion;
// callers encode sRGB themselves where required.
std::vector<uint8_t> encode_png(const Image& image, int bit_depth = 8);
Image decode_png(std::span<const uint8_t> bytes);
void write_png(const std::filesystem::path& path, const Image& image, int bit_depth = 8);
Image read_png(const std::filesystem::path& path);

/// Portable float map (little-endian, bottom-up rows as the format requires).
void write_pfm(const std::filesystem::path& path, const Image& image);

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

} // namespace relitex

#endif // RELITEX_IMAGE_HPP
