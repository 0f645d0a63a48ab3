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

#include <spdlog/spdlog.h>

namespace relitex {

namespace {

float edge(const Vec2f& a, const Vec2f& b, const Vec2f& p) {
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

bool is_top_left(const Vec2f& a, const Vec2f& b) {
    const float dx = b.x() - a.x();
    const float dy = b.y() - a.y();
    return (dy == 0.0f && dx > 0.0f) || dy < 0.0f;
}

bool inside(float w, bool top_left) { return w > 0.0f || (w == 0.0f && top_left); }

Vec2f uv_to_texel_space(const Vec2f& uv, int resolution) {
    return {uv.x() * float(resolution), (1.0f - uv.y()) * float(resolution)};
}

// Bilinear lookup with clamped edges in continuous texel coordinates.
void sample_map(const Image& map, float s, float t, float* out) {
    s = std::clamp(s, 0.0f, float(map.width - 1));
    t = std::clamp(t, 0.0f, float(map.height - 1));
    const int x0 = std::min(int(s), map.width - 1);
    const int y0 = std::min(int(t), map.height - 1);
    const int x1 = std::min(x0 + 1, map.width - 1);
    const int y1 = std::min(y0 + 1, map.height - 1);
    const float fx = s - float(x0);
    const float fy = t - float(y0);
    for (int c = 0; c < map.channels; ++c) {
        const float top = map.at(x0, y0, c) * (1.0f - fx) + map.at(x1, y0, c) * fx;
        const float bottom = map.at(x0, y1, c) * (1.0f - fx) + map.at(x1, y1, c) * fx;
        out[c] = top * (1.0f - fy) + bottom * fy;
    }
}

MaterialMaps empty_maps(int resolution) {
    MaterialMaps maps;
    maps.resolution = resolution;
    maps.kc = Image(resolution, resolution, 3, 0.0f);
    maps.km = Image(resolution, resolution, 1, 0.0f);
    maps.kr = Image(resolution, resolution, 1, 1.0f);
    maps.normal = Image(resolution, resolution, 3, 0.0f);
    for (size_t i = 0; i < maps.normal.pixel_count(); ++i) {
        maps.normal.pixel(i)[2] = 1.0f;
    }
    maps.coverage.assign(maps.kc.pixel_count(), kTexelEmpty);
    return maps;
}

} // namespace

std::vector<UvTexel> rasterize_uv(const Mesh& mesh, int resolution, size_t* overlapping) {
    if (resolution < 1) {
        throw ConfigError("UV raster resolution must be positive");
    }
    const size_t n = size_t(resolution) * size_t(resolution);
    std::vector<int64_t> owner(n, -1);
    std::vector<Vec3f> bary(n);
    size_t overlaps = 0;
    for (size_t fi = 0; fi < mesh.face_count(); ++fi) {
        std::array<uint32_t, 3> v = mesh.faces[fi];
        std::array<Vec2f, 3> p;
        for (int k = 0; k < 3; ++k) {
            p[k] = uv_to_texel_space(mesh.uvs[v[k]], resolution);
        }
        float area = edge(p[0], p[1], p[2]);
        std::array<int, 3> order = {0, 1, 2};
        if (area < 0.0f) {
            std::swap(p[1], p[2]);
            std::swap(order[1], order[2]);
            area = -area;
        }
        if (!(area > 0.0f)) {
            continue;
        }
        const std::array<bool, 3> top_left = {is_top_left(p[1], p[2]), is_top_left(p[2], p[0]),
                is_top_left(p[0], p[1])};
        const int x0 = std::max(0, int(std::ceil(std::min({p[0].x(), p[1].x(), p[2].x()}) - 0.5f)));
        const int x1 = std::min(resolution - 1,
                int(std::floor(std::max({p[0].x(), p[1].x(), p[2].x()}) - 0.5f)));
        const int y0 = std::max(0, int(std::ceil(std::min({p[0].y(), p[1].y(), p[2].y()}) - 0.5f)));
        const int y1 = std::min(resolution - 1,
                int(std::floor(std::max({p[0].y(), p[1].y(), p[2].y()}) - 0.5f)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Vec2f c(float(x) + 0.5f, float(y) + 0.5f);
                const float w0 = edge(p[1], p[2], c);
                const float w1 = edge(p[2], p[0], c);
                const float w2 = edge(p[0], p[1], c);
                if (!inside(w0, top_left[0]) || !inside(w1, top_left[1]) ||
                        !inside(w2, top_left[2])) {
                    continue;
                }
                const size_t idx = size_t(y) * resolution + x;
                if (owner[idx] >= 0) {
                    ++overlaps;
                }
                owner[idx] = int64_t(fi);
                Vec3f b;
                b[order[0]] = w0 / area;
                b[order[1]] = w1 / area;
                b[order[2]] = w2 / area;
                bary[idx] = b;
            }
        }
    }
    if (overlapping) {
        *overlapping = overlaps;
    }
    std::vector<UvTexel> texels;
    for (size_t idx = 0; idx < n; ++idx) {
        if (owner[idx] >= 0) {
            texels.push_back({uint32_t(idx), uint32_t(owner[idx]), bary[idx]});
        }
    }
    return texels;
}

MaterialMaps bake_uv(const Mesh& mesh, const MaterialField& field, int resolution, int dilation) {
    if (resolution < 64) {
        throw ConfigError("bake resolution must be at least 64, got " + std::to_string(resolution));
    }
    MaterialMaps maps = empty_maps(resolution);
    const std::vector<UvTexel> texels = rasterize_uv(mesh, resolution, &maps.overlapping_texels);
    if (maps.overlapping_texels > 0) {
        spdlog::warn("bake: {} texels are covered by more than one UV triangle; the last one wins",
                maps.overlapping_texels);
    }
    std::vector<Vec3f> points(texels.size());
    for (size_t i = 0; i < texels.size(); ++i) {
        const Face& f = mesh.faces[texels[i].face];
        const Vec3f& b = texels[i].barycentric;
        points[i] = b[0] * mesh.positions[f[0]] + b[1] * mesh.positions[f[1]] +
                b[2] * mesh.positions[f[2]];
    }
    std::vector<MaterialSample> materials(points.size());
    field.evaluate(points, materials);
    for (size_t i = 0; i < texels.size(); ++i) {
        const uint32_t idx = texels[i].texel;
        const MaterialSample& m = materials[i];
        const Vec3f n = tangent_space_normal(m.kn);
        for (int c = 0; c < 3; ++c) {
            maps.kc.pixel(idx)[c] = m.kc[c];
            maps.normal.pixel(idx)[c] = n[c];
        }
        maps.km.pixel(idx)[0] = m.km;
        maps.kr.pixel(idx)[0] = m.kr;
        maps.coverage[idx] = kTexelChart;
    }
    dilate_maps(maps, dilation);
    return maps;
}

void dilate_maps(MaterialMaps& maps, int texels) {
    const int res = maps.resolution;
    Image* images[] = {&maps.kc, &maps.km, &maps.kr, &maps.normal};
    for (int pass = 0; pass < texels; ++pass) {
        const std::vector<uint8_t> before = maps.coverage;
        for (int y = 0; y < res; ++y) {
            for (int x = 0; x < res; ++x) {
                const size_t idx = size_t(y) * res + x;
                if (before[idx] != kTexelEmpty) {
                    continue;
                }
                int count = 0;
                float sums[8] = {};
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx;
                        const int ny = y + dy;
                        if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= res || ny >= res) {
                            continue;
                        }
                        const size_t nidx = size_t(ny) * res + nx;
                        if (before[nidx] == kTexelEmpty) {
                            continue;
                        }
                        ++count;
                        int slot = 0;
                        for (Image* image : images) {
                            for (int c = 0; c < image->channels; ++c) {
                                sums[slot++] += image->pixel(nidx)[c];
                            }
                        }
                    }
                }
                if (count == 0) {
                    continue;
                }
                int slot = 0;
                for (Image* image : images) {
                    for (int c = 0; c < image->channels; ++c) {
                        image->pixel(idx)[c] = sums[slot++] / float(count);
                    }
                }
                Vec3f n(maps.normal.pixel(idx)[0], maps.normal.pixel(idx)[1],
                        maps.normal.pixel(idx)[2]);
                n = n.norm() > 1e-8f ? Vec3f(n.normalized()) : Vec3f(0.0f, 0.0f, 1.0f);
                for (int c = 0; c < 3; ++c) {
                    maps.normal.pixel(idx)[c] = n[c];
                }
                maps.coverage[idx] = kTexelDilated;
            }
        }
    }
}

std::vector<MaterialSample> sample_material_maps(const MaterialMaps& maps, const GBuffer& gbuffer) {
    std::vector<MaterialSample> out(gbuffer.covered.size());
    const float res = float(maps.resolution);
    for (size_t i = 0; i < gbuffer.covered.size(); ++i) {
        const Vec2f& uv = gbuffer.uv[gbuffer.covered[i]];
        const float s = uv.x() * res - 0.5f;
        const float t = (1.0f - uv.y()) * res - 0.5f;
        float kc[3], km, kr, normal[3];
        sample_map(maps.kc, s, t, kc);
        sample_map(maps.km, s, t, &km);
        sample_map(maps.kr, s, t, &kr);
        sample_map(maps.normal, s, t, normal);
        MaterialSample& m = out[i];
        m.kc = Vec3f(kc[0], kc[1], kc[2]);
        m.km = km;
        m.kr = kr;
        const float nz = std::max(normal[2], 1e-3f);
        constexpr float kLimit = 1.0f - 1e-6f;
        m.kn = Vec3f(std::atanh(std::clamp(2.0f * normal[0] / nz, -kLimit, kLimit)),
                std::atanh(std::clamp(2.0f * normal[1] / nz, -kLimit, kLimit)), 0.0f);
    }
    return out;
}

namespace {

Image encode_kc(const Image& kc) {
    Image out = kc;
    for (float& v : out.pixels) {
        v = srgb_encode(saturate(v));
    }
    return out;
}

Image encode_normal(const Image& normal) {
    Image out = normal;
    for (float& v : out.pixels) {
        v = saturate(0.5f * (v + 1.0f));
    }
    return out;
}

MaterialMaps decode_maps(const Image& kc, const Image& km, const Image& kr, const Image& normal) {
    if (kc.channels < 3 || normal.channels < 3 || !kc.same_shape(normal) ||
            km.width != kc.width || kr.width != kc.width || km.height != kc.height ||
            kr.height != kc.height || kc.width != kc.height) {
        throw ImageError("material maps must be square and share one resolution");
    }
    MaterialMaps maps = empty_maps(kc.width);
    for (size_t i = 0; i < kc.pixel_count(); ++i) {
        Vec3f n;
        for (int c = 0; c < 3; ++c) {
            maps.kc.pixel(i)[c] = srgb_decode(kc.pixel(i)[c]);
            n[c] = 2.0f * normal.pixel(i)[c] - 1.0f;
        }
        n = n.norm() > 1e-8f ? Vec3f(n.normalized()) : Vec3f(0.0f, 0.0f, 1.0f);
        for (int c = 0; c < 3; ++c) {
            maps.normal.pixel(i)[c] = n[c];
        }
        maps.km.pixel(i)[0] = km.pixel(i)[0];
        maps.kr.pixel(i)[0] = kr.pixel(i)[0];
        maps.coverage[i] = kTexelChart;
    }
    return maps;
}

} // namespace

void write_material_maps(const std::filesystem::path& dir, const MaterialMaps& maps) {
    write_png(dir / "kc.png", encode_kc(maps.kc), 8);
    write_png(dir / "km.png", maps.km, 8);
    write_png(dir / "kr.png", maps.kr, 8);
    write_png(dir / "normal.png", encode_normal(maps.normal), 16);
}

MaterialMaps read_material_maps(const std::filesystem::path& dir) {
    return decode_maps(read_png(dir / "kc.png"), read_png(dir / "km.png"), read_png(dir / "kr.png"),
            read_png(dir / "normal.png"));
}

MaterialMaps quantize_material_maps(const MaterialMaps& maps) {
    MaterialMaps out = decode_maps(decode_png(encode_png(encode_kc(maps.kc), 8)),
            decode_png(encode_png(maps.km, 8)), decode_png(encode_png(maps.kr, 8)),
            decode_png(encode_png(encode_normal(maps.normal), 16)));
    out.coverage = maps.coverage;
    out.overlapping_texels = maps.overlapping_texels;
    return out;
}

} // namespace relitex
