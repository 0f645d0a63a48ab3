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

#include <relitex/envlight.hpp>

#include <relitex/error.hpp>

#include <cstdio>
#include <cstring>
#include <string>

namespace relitex {

// Radiance RGBE: a shared exponent byte E and three mantissa bytes m decode to
// m * 2^(E - 136); E == 0 encodes black.

std::array<uint8_t, 4> rgbe_encode(const Vec3f& rgb) {
    const float v = std::max({rgb.x(), rgb.y(), rgb.z()});
    if (!(v >= 1e-32f)) {
        return {0, 0, 0, 0};
    }
    int exponent = 0;
    const float mantissa = std::frexp(v, &exponent);
    const float scale = mantissa * 256.0f / v;
    return {uint8_t(std::max(0.0f, rgb.x() * scale)), uint8_t(std::max(0.0f, rgb.y() * scale)),
            uint8_t(std::max(0.0f, rgb.z() * scale)), uint8_t(exponent + 128)};
}

Vec3f rgbe_decode(const std::array<uint8_t, 4>& rgbe) {
    if (rgbe[3] == 0) {
        return Vec3f::Zero();
    }
    const float f = std::ldexp(1.0f, int(rgbe[3]) - (128 + 8));
    return {float(rgbe[0]) * f, float(rgbe[1]) * f, float(rgbe[2]) * f};
}

namespace {

class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> bytes) : mBytes(bytes) {}

    bool at_end() const { return mOffset >= mBytes.size(); }

    uint8_t next() {
        if (at_end()) {
            throw ImageError("hdr: truncated file");
        }
        return mBytes[mOffset++];
    }

    std::string line() {
        std::string out;
        while (true) {
            const uint8_t c = next();
            if (c == '\n') {
                return out;
            }
            out.push_back(char(c));
        }
    }

private:
    std::span<const uint8_t> mBytes;
    size_t mOffset = 0;
};

void read_flat_scanline(ByteReader& in, std::vector<std::array<uint8_t, 4>>& row,
        const std::array<uint8_t, 4>& first) {
    row[0] = first;
    for (size_t x = 1; x < row.size(); ++x) {
        for (int c = 0; c < 4; ++c) {
            row[x][size_t(c)] = in.next();
        }
    }
}

void read_rle_scanline(ByteReader& in, std::vector<std::array<uint8_t, 4>>& row) {
    const size_t width = row.size();
    for (int c = 0; c < 4; ++c) {
        size_t x = 0;
        while (x < width) {
            uint8_t count = in.next();
            if (count > 128) {
                count = uint8_t(count - 128);
                if (x + count > width) {
                    throw ImageError("hdr: run overflows scanline");
                }
                const uint8_t value = in.next();
                for (int k = 0; k < count; ++k) {
                    row[x++][size_t(c)] = value;
                }
            } else {
                if (count == 0 || x + count > width) {
                    throw ImageError("hdr: bad literal run");
                }
                for (int k = 0; k < count; ++k) {
                    row[x++][size_t(c)] = in.next();
                }
            }
        }
    }
}

} // namespace

EnvironmentLight parse_hdr(std::span<const uint8_t> bytes) {
    ByteReader in(bytes);
    const std::string magic = in.line();
    if (magic.rfind("#?RADIANCE", 0) != 0 && magic.rfind("#?RGBE", 0) != 0) {
        throw ImageError("hdr: unsupported format (missing #?RADIANCE header)");
    }
    bool rgbe_format = true;
    while (true) {
        const std::string line = in.line();
        if (line.empty()) {
            break;
        }
        if (line.rfind("FORMAT=", 0) == 0) {
            rgbe_format = line == "FORMAT=32-bit_rle_rgbe";
        }
    }
    if (!rgbe_format) {
        throw ImageError("hdr: unsupported pixel format");
    }
    const std::string resolution = in.line();
    int width = 0;
    int height = 0;
    char ybuf[3] = {};
    char xbuf[3] = {};
    if (std::sscanf(resolution.c_str(), "%2s %d %2s %d", ybuf, &height, xbuf, &width) != 4 ||
            std::strcmp(ybuf, "-Y") != 0 || std::strcmp(xbuf, "+X") != 0 || width <= 0 ||
            height <= 0) {
        throw ImageError("hdr: unsupported resolution line '" + resolution + "'");
    }

    Image radiance(width, height, 3);
    std::vector<std::array<uint8_t, 4>> row(static_cast<size_t>(width));
    for (int y = 0; y < height; ++y) {
        std::array<uint8_t, 4> first{in.next(), in.next(), in.next(), in.next()};
        const bool rle = width >= 8 && width < 32768 && first[0] == 2 && first[1] == 2 &&
                ((int(first[2]) << 8) | first[3]) == width;
        if (rle) {
            read_rle_scanline(in, row);
        } else {
            read_flat_scanline(in, row, first);
        }
        for (int x = 0; x < width; ++x) {
            const Vec3f v = rgbe_decode(row[size_t(x)]);
            for (int c = 0; c < 3; ++c) {
                radiance.at(x, y, c) = v[c];
            }
        }
    }
    validate_radiance(radiance);
    EnvironmentLight light;
    light.radiance = std::move(radiance);
    return light;
}

EnvironmentLight load_hdr(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes;
    try {
        bytes = read_file(path);
    } catch (const Error& e) {
        throw ImageError(e.what());
    }
    return parse_hdr(bytes);
}

std::vector<uint8_t> encode_hdr(const Image& radiance) {
    validate_radiance(radiance);
    std::string header = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " +
            std::to_string(radiance.height) + " +X " + std::to_string(radiance.width) + "\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + radiance.pixel_count() * 4 + size_t(radiance.height) * 16);
    const int width = radiance.width;
    const bool rle = width >= 8 && width < 32768;
    std::vector<std::array<uint8_t, 4>> row(static_cast<size_t>(width));
    for (int y = 0; y < radiance.height; ++y) {
        for (int x = 0; x < width; ++x) {
            const float* p = radiance.pixel(size_t(y) * width + x);
            row[size_t(x)] = rgbe_encode(Vec3f(p[0], p[1], p[2]));
        }
        if (!rle) {
            for (const auto& rgbe : row) {
                out.insert(out.end(), rgbe.begin(), rgbe.end());
            }
            continue;
        }
        // Adaptive RLE scanline made of literal runs only; always unambiguous.
        out.insert(out.end(), {2, 2, uint8_t(width >> 8), uint8_t(width & 0xff)});
        for (size_t c = 0; c < 4; ++c) {
            for (int x = 0; x < width;) {
                const int count = std::min(128, width - x);
                out.push_back(uint8_t(count));
                for (int k = 0; k < count; ++k) {
                    out.push_back(row[size_t(x + k)][c]);
                }
                x += count;
            }
        }
    }
    return out;
}

void write_hdr(const std::filesystem::path& path, const Image& radiance) {
    write_file(path, encode_hdr(radiance));
}

} // namespace relitex
