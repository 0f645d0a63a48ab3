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

#include <bit>
#include <cstring>

namespace relitex {

namespace {

constexpr char kMagic[8] = {'R', 'L', 'X', 'F', 'I', 'E', 'L', 'D'};
constexpr uint32_t kVersion = 1;

class Writer {
public:
    void bytes(const void* data, size_t size) {
        const auto* p = static_cast<const uint8_t*>(data);
        mOut.insert(mOut.end(), p, p + size);
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            mOut.push_back(uint8_t(v >> (8 * i)));
        }
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            mOut.push_back(uint8_t(v >> (8 * i)));
        }
    }
    void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
    std::vector<uint8_t>& data() { return mOut; }

private:
    std::vector<uint8_t> mOut;
};

class Reader {
public:
    explicit Reader(std::span<const uint8_t> data) : mData(data) {}
    void bytes(void* out, size_t size) {
        need(size);
        std::memcpy(out, mData.data() + mPos, size);
        mPos += size;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= uint32_t(mData[mPos + size_t(i)]) << (8 * i);
        }
        mPos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= uint64_t(mData[mPos + size_t(i)]) << (8 * i);
        }
        mPos += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    bool at_end() const { return mPos == mData.size(); }

private:
    void need(size_t size) const {
        if (mPos + size > mData.size()) {
            throw Error("checkpoint: truncated file");
        }
    }
    std::span<const uint8_t> mData;
    size_t mPos = 0;
};

using Shape = std::vector<uint64_t>;

std::vector<Shape> tensor_shapes(const TextureField& field) {
    const FieldConfig& c = field.config();
    std::vector<Shape> shapes;
    for (int l = 0; l < c.levels; ++l) {
        shapes.push_back({field.level_rows(l), uint64_t(c.features_per_level)});
    }
    shapes.push_back({uint64_t(c.hidden_width), uint64_t(c.feature_dim())});
    shapes.push_back({uint64_t(c.hidden_width)});
    shapes.push_back({uint64_t(TextureField::kOutputs), uint64_t(c.hidden_width)});
    shapes.push_back({uint64_t(TextureField::kOutputs)});
    return shapes;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const TextureField& field) {
    const FieldConfig& c = field.config();
    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    w.u32(uint32_t(c.levels));
    w.u32(uint32_t(c.features_per_level));
    w.u32(uint32_t(c.table_size_log2));
    w.u32(uint32_t(c.base_resolution));
    w.u32(uint32_t(c.finest_resolution));
    w.f32(float(c.growth_factor()));
    w.u32(uint32_t(c.hidden_width));
    const std::vector<Shape> shapes = tensor_shapes(field);
    w.u32(uint32_t(shapes.size()));
    for (const Shape& shape : shapes) {
        w.u32(uint32_t(shape.size()));
        for (uint64_t d : shape) {
            w.u64(d);
        }
    }
    for (float v : field.parameters()) {
        w.f32(v);
    }
    write_file(path, w.data());
}

TextureField load_checkpoint(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_file(path);
    Reader r(bytes);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw Error("checkpoint: " + path.string() + " is not a field checkpoint");
    }
    const uint32_t version = r.u32();
    if (version != kVersion) {
        throw Error("checkpoint: unsupported version " + std::to_string(version));
    }
    FieldConfig c;
    c.levels = int(r.u32());
    c.features_per_level = int(r.u32());
    c.table_size_log2 = int(r.u32());
    c.base_resolution = int(r.u32());
    c.finest_resolution = int(r.u32());
    const float growth = r.f32();
    c.hidden_width = int(r.u32());
    c.validate();
    if (std::abs(double(growth) - c.growth_factor()) > 1e-5) {
        throw Error("checkpoint: growth factor does not match the stored resolutions");
    }
    TextureField field(c, 0, false);
    const std::vector<Shape> expected = tensor_shapes(field);
    const uint32_t count = r.u32();
    if (count != expected.size()) {
        throw Error("checkpoint: expected " + std::to_string(expected.size()) + " tensors, found " +
                std::to_string(count));
    }
    for (const Shape& shape : expected) {
        const uint32_t rank = r.u32();
        Shape stored(rank);
        for (uint64_t& d : stored) {
            d = r.u64();
        }
        if (stored != shape) {
            throw Error("checkpoint: tensor shape mismatch");
        }
    }
    for (float& v : field.parameters()) {
        v = r.f32();
    }
    if (!r.at_end()) {
        throw Error("checkpoint: trailing bytes after tensor data");
    }
    return field;
}

} // namespace relitex
