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

#include <relitex/image.hpp>

#include <relitex/error.hpp>

#include <png.h>

#include <cstring>
#include <fstream>
#include <limits>

namespace relitex {

Image luminance(const Image& rgb) {
    if (rgb.channels != 3) {
        throw ImageError("luminance expects an RGB image");
    }
    Image out(rgb.width, rgb.height, 1);
    for (size_t i = 0; i < rgb.pixel_count(); ++i) {
        const float* p = rgb.pixel(i);
        out.pixels[i] = 0.2126f * p[0] + 0.7152f * p[1] + 0.0722f * p[2];
    }
    return out;
}

static void check_same_shape(const Image& a, const Image& b, std::span<const uint8_t> mask) {
    if (!a.same_shape(b)) {
        throw ImageError("image shape mismatch");
    }
    if (!mask.empty() && mask.size() != a.pixel_count()) {
        throw ImageError("mask size does not match image");
    }
}

double psnr(const Image& a, const Image& b, std::span<const uint8_t> mask) {
    check_same_shape(a, b, mask);
    double sum = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < a.pixel_count(); ++i) {
        if (!mask.empty() && !mask[i]) {
            continue;
        }
        for (int c = 0; c < a.channels; ++c) {
            const double d = double(a.pixel(i)[c]) - double(b.pixel(i)[c]);
            sum += d * d;
        }
        count += size_t(a.channels);
    }
    if (count == 0) {
        throw ImageError("psnr over an empty mask");
    }
    const double mse = sum / double(count);
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return -10.0 * std::log10(mse);
}

double mean_abs_difference(const Image& a, const Image& b, std::span<const uint8_t> mask) {
    check_same_shape(a, b, mask);
    double sum = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < a.pixel_count(); ++i) {
        if (!mask.empty() && !mask[i]) {
            continue;
        }
        for (int c = 0; c < a.channels; ++c) {
            sum += std::abs(double(a.pixel(i)[c]) - double(b.pixel(i)[c]));
        }
        count += size_t(a.channels);
    }
    return count ? sum / double(count) : 0.0;
}

Image downsample(const Image& image, int factor) {
    if (factor < 1 || image.width % factor || image.height % factor) {
        throw ImageError("downsample factor must divide the image size");
    }
    Image out(image.width / factor, image.height / factor, image.channels);
    const float norm = 1.0f / float(factor * factor);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                float sum = 0.0f;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        sum += image.at(x * factor + dx, y * factor + dy, c);
                    }
                }
                out.at(x, y, c) = sum * norm;
            }
        }
    }
    return out;
}

namespace {

struct PngReadCursor {
    std::span<const uint8_t> bytes;
    size_t offset = 0;
};

void png_error_handler(png_structp, png_const_charp message) {
    throw ImageError(std::string("png: ") + message);
}

void png_warning_handler(png_structp, png_const_charp) {}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
    auto* cursor = static_cast<PngReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->bytes.size()) {
        png_error(png, "unexpected end of data");
    }
    std::memcpy(data, cursor->bytes.data() + cursor->offset, length);
    cursor->offset += length;
}

int png_color_type(int channels) {
    switch (channels) {
        case 1: return PNG_COLOR_TYPE_GRAY;
        case 2: return PNG_COLOR_TYPE_GRAY_ALPHA;
        case 3: return PNG_COLOR_TYPE_RGB;
        case 4: return PNG_COLOR_TYPE_RGB_ALPHA;
        default: throw ImageError("png supports 1 to 4 channels");
    }
}

} // namespace

std::vector<uint8_t> encode_png(const Image& image, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) {
        throw ImageError("png bit depth must be 8 or 16");
    }
    if (image.empty()) {
        throw ImageError("cannot encode an empty image");
    }
    const int color_type = png_color_type(image.channels);
    const size_t bytes_per_sample = size_t(bit_depth / 8);
    const size_t row_bytes = size_t(image.width) * image.channels * bytes_per_sample;
    const float max_value = bit_depth == 8 ? 255.0f : 65535.0f;

    std::vector<uint8_t> raw(row_bytes * image.height);
    for (size_t i = 0; i < image.pixels.size(); ++i) {
        const auto q = uint32_t(std::lround(saturate(image.pixels[i]) * max_value));
        if (bit_depth == 8) {
            raw[i] = uint8_t(q);
        } else {
            raw[2 * i] = uint8_t(q >> 8);
            raw[2 * i + 1] = uint8_t(q & 0xff);
        }
    }

    std::vector<uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
            png_error_handler, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("png: out of memory");
    }
    try {
        png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
        png_set_IHDR(png, info, png_uint_32(image.width), png_uint_32(image.height), bit_depth,
                color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < image.height; ++y) {
            png_write_row(png, raw.data() + size_t(y) * row_bytes);
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

Image decode_png(std::span<const uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw ImageError("png: bad signature");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
            png_error_handler, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("png: out of memory");
    }
    PngReadCursor cursor{bytes, 0};
    Image image;
    try {
        png_set_read_fn(png, &cursor, png_read_from_span);
        png_read_info(png, info);
        const int color_type = png_get_color_type(png, info);
        const int bit_depth = png_get_bit_depth(png, info);
        if (color_type == PNG_COLOR_TYPE_PALETTE) {
            png_set_palette_to_rgb(png);
        }
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
        }
        png_read_update_info(png, info);
        const int channels = png_get_channels(png, info);
        const int depth = png_get_bit_depth(png, info);
        const auto width = int(png_get_image_width(png, info));
        const auto height = int(png_get_image_height(png, info));
        const size_t row_bytes = png_get_rowbytes(png, info);
        std::vector<uint8_t> raw(row_bytes * size_t(height));
        for (int y = 0; y < height; ++y) {
            png_read_row(png, raw.data() + size_t(y) * row_bytes, nullptr);
        }
        png_read_end(png, nullptr);

        image = Image(width, height, channels);
        const float scale = depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
        for (size_t i = 0; i < image.pixels.size(); ++i) {
            const uint32_t q = depth == 16 ? (uint32_t(raw[2 * i]) << 8) | raw[2 * i + 1]
                                           : uint32_t(raw[i]);
            image.pixels[i] = float(q) * scale;
        }
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
    const std::vector<uint8_t> bytes = encode_png(image, bit_depth);
    write_file(path, bytes);
}

Image read_png(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_file(path);
    return decode_png(bytes);
}

void write_pfm(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 3 && image.channels != 1) {
        throw ImageError("pfm supports 1 or 3 channels");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ImageError("cannot open " + path.string() + " for writing");
    }
    out << (image.channels == 3 ? "PF" : "Pf") << "\n"
        << image.width << " " << image.height << "\n-1.0\n";
    const size_t row = size_t(image.width) * image.channels;
    for (int y = image.height - 1; y >= 0; --y) {
        out.write(reinterpret_cast<const char*>(image.pixels.data() + size_t(y) * row),
                std::streamsize(row * sizeof(float)));
    }
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

const char* to_string(BackendErrorKind kind) {
    switch (kind) {
        case BackendErrorKind::ConnectionRefused: return "connection refused";
        case BackendErrorKind::Timeout: return "timeout";
        case BackendErrorKind::Schema: return "schema violation";
        case BackendErrorKind::Server: return "server error";
        case BackendErrorKind::Unreachable: return "backend unreachable";
    }
    return "unknown";
}

} // namespace relitex
