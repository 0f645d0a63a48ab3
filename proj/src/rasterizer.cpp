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

#include <relitex/renderer.hpp>

#include <relitex/error.hpp>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace relitex {

namespace {

constexpr float kNearDepth = 1e-3f;
constexpr int kBandRows = 8;

struct ScreenTriangle {
    uint32_t face;
    std::array<uint32_t, 3> vertex;
    std::array<Vec2f, 3> p;
    std::array<float, 3> inv_depth;
    float inv_area;
    int x0, x1, y0, y1;
    std::array<bool, 3> top_left;
};

float edge(const Vec2f& a, const Vec2f& b, const Vec2f& p) {
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// With y pointing down and counter-clockwise-positive edge functions, a top edge runs
// in +x and a left edge runs in -y.
bool is_top_left(const Vec2f& a, const Vec2f& b) {
    const float dx = b.x() - a.x();
    const float dy = b.y() - a.y();
    return (dy == 0.0f && dx > 0.0f) || dy < 0.0f;
}

bool inside(float w, bool top_left) { return w > 0.0f || (w == 0.0f && top_left); }

} // namespace

Camera Camera::orbit(float azimuth, float elevation, float distance, float fov_y, int width,
        int height, const Vec3f& target) {
    Camera camera;
    camera.target = target;
    camera.position = target + distance * Vec3f(std::cos(elevation) * std::cos(azimuth),
                                                   std::sin(elevation),
                                                   std::cos(elevation) * std::sin(azimuth));
    camera.up = Vec3f(0.0f, 1.0f, 0.0f);
    camera.fov_y = fov_y;
    camera.width = width;
    camera.height = height;
    return camera;
}

float Camera::framing_distance(float fov_y, float radius) {
    return 1.1f * radius / std::sin(0.5f * fov_y);
}

void Camera::validate() const {
    if (!position.allFinite() || !target.allFinite() || !up.allFinite()) {
        throw ConfigError("camera has non-finite vectors");
    }
    if ((target - position).norm() <= 0.0f) {
        throw ConfigError("camera position equals its target");
    }
    if (!(fov_y > 0.0f && fov_y < float(kPi))) {
        throw ConfigError("camera fov_y must be in (0, pi)");
    }
    if (width <= 0 || height <= 0) {
        throw ConfigError("camera resolution must be positive");
    }
    if ((target - position).normalized().cross(up).norm() < 1e-6f) {
        throw ConfigError("camera up vector is parallel to the view direction");
    }
}

bool Camera::project(const Vec3f& world, Vec2f& pixel, float& depth) const {
    const Vec3f f = forward();
    const Vec3f r = f.cross(up).normalized();
    const Vec3f u = r.cross(f);
    const Vec3f q = world - position;
    depth = q.dot(f);
    if (depth <= kNearDepth) {
        return false;
    }
    const float tan_half = std::tan(0.5f * fov_y);
    const float aspect = float(width) / float(height);
    const float xn = q.dot(r) / (depth * tan_half * aspect);
    const float yn = q.dot(u) / (depth * tan_half);
    pixel = Vec2f((xn + 1.0f) * 0.5f * float(width), (1.0f - yn) * 0.5f * float(height));
    return true;
}

GBuffer rasterize(const Mesh& mesh, const Camera& camera) {
    camera.validate();
    GBuffer g;
    g.width = camera.width;
    g.height = camera.height;
    g.camera = camera;
    const size_t n = g.pixel_count();
    g.mask.assign(n, 0);
    g.depth.assign(n, std::numeric_limits<float>::infinity());
    g.face.assign(n, -1);

    // Project vertices once.
    std::vector<Vec2f> screen(mesh.vertex_count());
    std::vector<float> depth(mesh.vertex_count());
    std::vector<uint8_t> visible(mesh.vertex_count());
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
        visible[i] = camera.project(mesh.positions[i], screen[i], depth[i]) ? 1 : 0;
    }

    // Triangles that cross the near plane are dropped rather than clipped; the orbit
    // cameras used here always sit well outside the unit sphere.
    std::vector<ScreenTriangle> tris;
    tris.reserve(mesh.face_count());
    for (size_t fi = 0; fi < mesh.face_count(); ++fi) {
        const Face& f = mesh.faces[fi];
        if (!visible[f[0]] || !visible[f[1]] || !visible[f[2]]) {
            continue;
        }
        ScreenTriangle t;
        t.face = uint32_t(fi);
        t.vertex = f;
        float area = edge(screen[f[0]], screen[f[1]], screen[f[2]]);
        if (area < 0.0f) {
            std::swap(t.vertex[1], t.vertex[2]);
            area = -area;
        }
        if (!(area > 0.0f)) {
            continue;
        }
        for (int k = 0; k < 3; ++k) {
            t.p[k] = screen[t.vertex[k]];
            t.inv_depth[k] = 1.0f / depth[t.vertex[k]];
        }
        t.inv_area = 1.0f / area;
        const float min_x = std::min({t.p[0].x(), t.p[1].x(), t.p[2].x()});
        const float max_x = std::max({t.p[0].x(), t.p[1].x(), t.p[2].x()});
        const float min_y = std::min({t.p[0].y(), t.p[1].y(), t.p[2].y()});
        const float max_y = std::max({t.p[0].y(), t.p[1].y(), t.p[2].y()});
        t.x0 = std::max(0, int(std::ceil(min_x - 0.5f)));
        t.x1 = std::min(g.width - 1, int(std::floor(max_x - 0.5f)));
        t.y0 = std::max(0, int(std::ceil(min_y - 0.5f)));
        t.y1 = std::min(g.height - 1, int(std::floor(max_y - 0.5f)));
        if (t.x0 > t.x1 || t.y0 > t.y1) {
            continue;
        }
        t.top_left = {is_top_left(t.p[1], t.p[2]), is_top_left(t.p[2], t.p[0]),
                is_top_left(t.p[0], t.p[1])};
        tris.push_back(t);
    }

    std::vector<Vec3f> bary(n, Vec3f::Zero());
    const int bands = (g.height + kBandRows - 1) / kBandRows;
    tbb::parallel_for(tbb::blocked_range<int>(0, bands), [&](const tbb::blocked_range<int>& range) {
        for (int band = range.begin(); band != range.end(); ++band) {
            const int row0 = band * kBandRows;
            const int row1 = std::min(g.height - 1, row0 + kBandRows - 1);
            for (size_t ti = 0; ti < tris.size(); ++ti) {
                const ScreenTriangle& t = tris[ti];
                const int y0 = std::max(t.y0, row0);
                const int y1 = std::min(t.y1, row1);
                for (int y = y0; y <= y1; ++y) {
                    for (int x = t.x0; x <= t.x1; ++x) {
                        const Vec2f p(float(x) + 0.5f, float(y) + 0.5f);
                        const float w0 = edge(t.p[1], t.p[2], p);
                        const float w1 = edge(t.p[2], t.p[0], p);
                        const float w2 = edge(t.p[0], t.p[1], p);
                        if (!inside(w0, t.top_left[0]) || !inside(w1, t.top_left[1]) ||
                                !inside(w2, t.top_left[2])) {
                            continue;
                        }
                        const Vec3f b(w0 * t.inv_area * t.inv_depth[0],
                                w1 * t.inv_area * t.inv_depth[1], w2 * t.inv_area * t.inv_depth[2]);
                        const float inv_z = b.sum();
                        const float z = 1.0f / inv_z;
                        const size_t idx = size_t(y) * g.width + x;
                        if (z < g.depth[idx]) {
                            g.depth[idx] = z;
                            g.face[idx] = int32_t(ti);
                            bary[idx] = b * z;
                        }
                    }
                }
            }
        }
    });

    g.position.assign(n, Vec3f::Zero());
    g.normal.assign(n, Vec3f::Zero());
    g.tangent.assign(n, Vec3f::Zero());
    g.bitangent.assign(n, Vec3f::Zero());
    g.uv.assign(n, Vec2f::Zero());
    for (size_t idx = 0; idx < n; ++idx) {
        if (g.face[idx] < 0) {
            g.depth[idx] = 0.0f;
            continue;
        }
        const ScreenTriangle& t = tris[size_t(g.face[idx])];
        const Vec3f& b = bary[idx];
        const auto& v = t.vertex;
        g.mask[idx] = 1;
        g.covered.push_back(uint32_t(idx));
        g.position[idx] = b[0] * mesh.positions[v[0]] + b[1] * mesh.positions[v[1]] +
                b[2] * mesh.positions[v[2]];
        g.uv[idx] = b[0] * mesh.uvs[v[0]] + b[1] * mesh.uvs[v[1]] + b[2] * mesh.uvs[v[2]];
        Vec3f normal = b[0] * mesh.normals[v[0]] + b[1] * mesh.normals[v[1]] +
                b[2] * mesh.normals[v[2]];
        const float len = normal.norm();
        if (len > 1e-12f) {
            normal /= len;
        } else {
            normal = (mesh.positions[v[1]] - mesh.positions[v[0]])
                             .cross(mesh.positions[v[2]] - mesh.positions[v[0]])
                             .normalized();
        }
        Vec3f tangent = b[0] * mesh.tangents[v[0]] + b[1] * mesh.tangents[v[1]] +
                b[2] * mesh.tangents[v[2]];
        tangent -= normal * normal.dot(tangent);
        if (tangent.squaredNorm() < 1e-12f) {
            Vec3f unused;
            orthonormal_basis(normal, tangent, unused);
        } else {
            tangent.normalize();
        }
        g.normal[idx] = normal;
        g.tangent[idx] = tangent;
        g.bitangent[idx] = normal.cross(tangent);
        g.face[idx] = int32_t(t.face);
    }
    return g;
}

std::vector<Vec3f> covered_positions(const GBuffer& gbuffer) {
    std::vector<Vec3f> out;
    out.reserve(gbuffer.covered.size());
    for (uint32_t idx : gbuffer.covered) {
        out.push_back(gbuffer.position[idx]);
    }
    return out;
}

} // namespace relitex
