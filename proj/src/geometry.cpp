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

#include <relitex/geometry.hpp>

#include <relitex/error.hpp>

#include <spdlog/spdlog.h>

#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>

namespace relitex {

float Mesh::face_area(size_t face) const {
    const Face& f = faces[face];
    const Vec3f e1 = positions[f[1]] - positions[f[0]];
    const Vec3f e2 = positions[f[2]] - positions[f[0]];
    return 0.5f * e1.cross(e2).norm();
}

float Mesh::surface_area() const {
    double total = 0.0;
    for (size_t i = 0; i < faces.size(); ++i) {
        total += face_area(i);
    }
    return float(total);
}

namespace {

struct ObjCorner {
    int position = 0;
    int uv = 0;
    int normal = 0;
    auto operator<=>(const ObjCorner&) const = default;
};

int resolve_index(long raw, size_t count, size_t line) {
    const long index = raw < 0 ? long(count) + raw : raw - 1;
    if (raw == 0 || index < 0 || index >= long(count)) {
        throw MeshError("OBJ index out of range at line " + std::to_string(line));
    }
    return int(index);
}

long parse_long(std::string_view text, size_t line) {
    long value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw MeshError("malformed OBJ index '" + std::string(text) + "' at line " +
                std::to_string(line));
    }
    return value;
}

ObjCorner parse_corner(std::string_view token, size_t line, size_t nv, size_t nvt, size_t nvn) {
    ObjCorner corner{-1, -1, -1};
    std::array<std::string_view, 3> parts{};
    size_t part = 0;
    size_t start = 0;
    for (size_t i = 0; i <= token.size(); ++i) {
        if (i == token.size() || token[i] == '/') {
            if (part >= 3) {
                throw MeshError("malformed OBJ face corner at line " + std::to_string(line));
            }
            parts[part++] = token.substr(start, i - start);
            start = i + 1;
        }
    }
    corner.position = resolve_index(parse_long(parts[0], line), nv, line);
    if (part > 1 && !parts[1].empty()) {
        corner.uv = resolve_index(parse_long(parts[1], line), nvt, line);
    }
    if (part > 2 && !parts[2].empty()) {
        corner.normal = resolve_index(parse_long(parts[2], line), nvn, line);
    }
    return corner;
}

struct PositionKey {
    std::array<uint32_t, 3> bits;
    bool operator==(const PositionKey&) const = default;
};

struct PositionKeyHash {
    size_t operator()(const PositionKey& k) const {
        return size_t(mix_seed(k.bits[0], mix_seed(k.bits[1], k.bits[2])));
    }
};

PositionKey position_key(const Vec3f& p) {
    PositionKey key{};
    for (int i = 0; i < 3; ++i) {
        const float v = p[i] == 0.0f ? 0.0f : p[i];
        std::memcpy(&key.bits[i], &v, sizeof(float));
    }
    return key;
}

Vec3f fallback_tangent(const Vec3f& n) {
    Vec3f t, b;
    orthonormal_basis(n, t, b);
    return t;
}

Vec3f orthogonalize(const Vec3f& t, const Vec3f& n) {
    Vec3f out = t - n * n.dot(t);
    const float len = out.norm();
    if (!(len > 1e-6f)) {
        return fallback_tangent(n);
    }
    return out / len;
}

} // namespace

Mesh parse_obj(std::istream& in, std::string_view name) {
    std::vector<Vec3f> positions;
    std::vector<Vec2f> uvs;
    std::vector<Vec3f> normals;
    std::vector<std::array<ObjCorner, 3>> triangles;

    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) {
            continue;
        }
        if (tag == "v") {
            Vec3f p;
            if (!(ls >> p.x() >> p.y() >> p.z())) {
                throw MeshError("malformed vertex at line " + std::to_string(line_number));
            }
            positions.push_back(p);
        } else if (tag == "vt") {
            Vec2f uv;
            if (!(ls >> uv.x() >> uv.y())) {
                throw MeshError("malformed texture coordinate at line " +
                        std::to_string(line_number));
            }
            uvs.push_back(uv);
        } else if (tag == "vn") {
            Vec3f n;
            if (!(ls >> n.x() >> n.y() >> n.z())) {
                throw MeshError("malformed normal at line " + std::to_string(line_number));
            }
            normals.push_back(n);
        } else if (tag == "f") {
            std::vector<std::string> tokens;
            std::string token;
            while (ls >> token) {
                tokens.push_back(token);
            }
            if (tokens.size() != 3) {
                throw MeshError(std::string(name) + ": non-triangulated face with " +
                        std::to_string(tokens.size()) + " vertices at line " +
                        std::to_string(line_number));
            }
            std::array<ObjCorner, 3> tri;
            for (int k = 0; k < 3; ++k) {
                tri[k] = parse_corner(tokens[k], line_number, positions.size(), uvs.size(),
                        normals.size());
                if (tri[k].uv < 0) {
                    throw MeshError(std::string(name) + ": missing UVs at line " +
                            std::to_string(line_number) + " (UVs are required for baking)");
                }
            }
            triangles.push_back(tri);
        }
    }
    if (triangles.empty()) {
        throw MeshError(std::string(name) + ": no faces");
    }

    bool has_normals = true;
    for (const auto& tri : triangles) {
        for (const ObjCorner& c : tri) {
            has_normals = has_normals && c.normal >= 0;
        }
    }

    Mesh mesh;
    std::map<ObjCorner, uint32_t> remap;
    for (const auto& tri : triangles) {
        Face face{};
        for (int k = 0; k < 3; ++k) {
            ObjCorner key = tri[k];
            if (!has_normals) {
                key.normal = -1;
            }
            auto [it, inserted] = remap.try_emplace(key, uint32_t(mesh.positions.size()));
            if (inserted) {
                mesh.positions.push_back(positions[key.position]);
                mesh.uvs.push_back(uvs[key.uv]);
                if (has_normals) {
                    mesh.normals.push_back(normals[key.normal]);
                }
            }
            face[k] = it->second;
        }
        mesh.faces.push_back(face);
    }

    for (const Vec2f& uv : mesh.uvs) {
        if (!uv.allFinite()) {
            throw MeshError(std::string(name) + ": non-finite UV");
        }
        if ((uv.array() < -1e-4f).any() || (uv.array() > 1.0f + 1e-4f).any()) {
            throw MeshError(std::string(name) + ": UV outside [0,1]");
        }
    }
    for (const Vec3f& p : mesh.positions) {
        if (!p.allFinite()) {
            throw MeshError(std::string(name) + ": non-finite vertex position");
        }
    }

    if (has_normals) {
        for (Vec3f& n : mesh.normals) {
            const float len = n.norm();
            if (!(len > 0.0f) || !std::isfinite(len)) {
                has_normals = false;
                break;
            }
            n /= len;
        }
    }
    if (!has_normals) {
        compute_normals(mesh);
    }
    normalize_to_unit_sphere(mesh);
    compute_tangents(mesh);
    validate_mesh(mesh);
    return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MeshError("cannot open mesh file " + path.string());
    }
    return parse_obj(in, path.string());
}

void write_obj(const std::filesystem::path& path, const Mesh& mesh) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw MeshError("cannot write " + path.string());
    }
    out.precision(9);
    for (const Vec3f& p : mesh.positions) {
        out << "v " << p.x() << " " << p.y() << " " << p.z() << "\n";
    }
    for (const Vec2f& uv : mesh.uvs) {
        out << "vt " << uv.x() << " " << uv.y() << "\n";
    }
    for (const Vec3f& n : mesh.normals) {
        out << "vn " << n.x() << " " << n.y() << " " << n.z() << "\n";
    }
    const bool normals = mesh.normals.size() == mesh.positions.size();
    for (const Face& f : mesh.faces) {
        out << "f";
        for (uint32_t i : f) {
            out << " " << i + 1 << "/" << i + 1;
            if (normals) {
                out << "/" << i + 1;
            }
        }
        out << "\n";
    }
}

void compute_normals(Mesh& mesh) {
    std::unordered_map<PositionKey, uint32_t, PositionKeyHash> groups;
    std::vector<uint32_t> group_of(mesh.positions.size());
    for (size_t i = 0; i < mesh.positions.size(); ++i) {
        auto [it, inserted] = groups.try_emplace(position_key(mesh.positions[i]),
                uint32_t(groups.size()));
        group_of[i] = it->second;
    }
    std::vector<Vec3f> accum(groups.size(), Vec3f::Zero());
    for (const Face& f : mesh.faces) {
        // Unnormalized cross product is area-weighted.
        const Vec3f n = (mesh.positions[f[1]] - mesh.positions[f[0]])
                                .cross(mesh.positions[f[2]] - mesh.positions[f[0]]);
        for (uint32_t v : f) {
            accum[group_of[v]] += n;
        }
    }
    mesh.normals.resize(mesh.positions.size());
    for (size_t i = 0; i < mesh.positions.size(); ++i) {
        const Vec3f& n = accum[group_of[i]];
        const float len = n.norm();
        mesh.normals[i] = len > 0.0f ? Vec3f(n / len) : Vec3f(0.0f, 1.0f, 0.0f);
    }
}

void compute_tangents(Mesh& mesh) {
    std::vector<Vec3f> accum(mesh.positions.size(), Vec3f::Zero());
    for (const Face& f : mesh.faces) {
        const Vec3f e1 = mesh.positions[f[1]] - mesh.positions[f[0]];
        const Vec3f e2 = mesh.positions[f[2]] - mesh.positions[f[0]];
        const Vec2f d1 = mesh.uvs[f[1]] - mesh.uvs[f[0]];
        const Vec2f d2 = mesh.uvs[f[2]] - mesh.uvs[f[0]];
        const float det = d1.x() * d2.y() - d2.x() * d1.y();
        if (std::abs(det) < 1e-12f) {
            continue;
        }
        const Vec3f dp_du = (e1 * d2.y() - e2 * d1.y()) / det;
        const float len = dp_du.norm();
        if (!(len > 0.0f) || !std::isfinite(len)) {
            continue;
        }
        const float area = 0.5f * e1.cross(e2).norm();
        for (uint32_t v : f) {
            accum[v] += dp_du * (area / len);
        }
    }
    mesh.tangents.resize(mesh.positions.size());
    for (size_t i = 0; i < mesh.positions.size(); ++i) {
        mesh.tangents[i] = orthogonalize(accum[i], mesh.normals[i]);
    }
}

void normalize_to_unit_sphere(Mesh& mesh) {
    if (mesh.positions.empty()) {
        return;
    }
    Vec3f lo = mesh.positions.front();
    Vec3f hi = lo;
    for (const Vec3f& p : mesh.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3f center = 0.5f * (lo + hi);
    float radius = 0.0f;
    for (const Vec3f& p : mesh.positions) {
        radius = std::max(radius, (p - center).norm());
    }
    if (!(radius > 0.0f)) {
        throw MeshError("degenerate mesh: all vertices coincide");
    }
    for (Vec3f& p : mesh.positions) {
        p = (p - center) / radius;
    }
}

void validate_mesh(const Mesh& mesh) {
    const size_t n = mesh.positions.size();
    if (mesh.normals.size() != n || mesh.tangents.size() != n || mesh.uvs.size() != n) {
        throw MeshError("per-vertex attribute arrays differ in length");
    }
    for (const Face& f : mesh.faces) {
        for (uint32_t v : f) {
            if (v >= n) {
                throw MeshError("face index out of range");
            }
        }
    }
    for (size_t i = 0; i < n; ++i) {
        if (std::abs(mesh.normals[i].norm() - 1.0f) > 1e-4f ||
                std::abs(mesh.tangents[i].norm() - 1.0f) > 1e-4f) {
            throw MeshError("normal or tangent is not unit length");
        }
        if (std::abs(mesh.tangents[i].dot(mesh.normals[i])) > 1e-3f) {
            throw MeshError("tangent is not orthogonal to the normal");
        }
    }
}

SurfacePoint surface_point(const Mesh& mesh, uint32_t face, const Vec3f& bary) {
    const Face& f = mesh.faces[face];
    SurfacePoint sp;
    sp.face = face;
    sp.barycentric = bary;
    sp.position = bary[0] * mesh.positions[f[0]] + bary[1] * mesh.positions[f[1]] +
            bary[2] * mesh.positions[f[2]];
    sp.uv = bary[0] * mesh.uvs[f[0]] + bary[1] * mesh.uvs[f[1]] + bary[2] * mesh.uvs[f[2]];
    Vec3f n = bary[0] * mesh.normals[f[0]] + bary[1] * mesh.normals[f[1]] +
            bary[2] * mesh.normals[f[2]];
    if (!(n.norm() > 1e-8f)) {
        n = (mesh.positions[f[1]] - mesh.positions[f[0]])
                    .cross(mesh.positions[f[2]] - mesh.positions[f[0]]);
    }
    n.normalize();
    const Vec3f t = orthogonalize(bary[0] * mesh.tangents[f[0]] + bary[1] * mesh.tangents[f[1]] +
                    bary[2] * mesh.tangents[f[2]],
            n);
    sp.normal = n;
    sp.frame.col(0) = t;
    sp.frame.col(1) = n.cross(t);
    sp.frame.col(2) = n;
    return sp;
}

std::vector<SurfacePoint> sample_surface(const Mesh& mesh, size_t count, uint64_t seed) {
    if (count == 0) {
        throw MeshError("sample_surface requires count >= 1");
    }
    std::vector<double> cdf(mesh.faces.size());
    double total = 0.0;
    for (size_t i = 0; i < mesh.faces.size(); ++i) {
        total += mesh.face_area(i);
        cdf[i] = total;
    }
    if (!(total > 0.0)) {
        throw MeshError("degenerate mesh: zero surface area");
    }
    std::mt19937_64 rng(mix_seed(seed));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<SurfacePoint> points;
    points.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        const double pick = uniform(rng) * total;
        const auto face = uint32_t(std::min<size_t>(
                size_t(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin()),
                cdf.size() - 1));
        const double r1 = std::sqrt(uniform(rng));
        const double r2 = uniform(rng);
        const Vec3f bary(float(1.0 - r1), float(r1 * (1.0 - r2)), float(r1 * r2));
        points.push_back(surface_point(mesh, face, bary));
    }
    return points;
}

Mesh make_uv_sphere(int segments, int rings) {
    if (segments < 3 || rings < 2) {
        throw MeshError("sphere needs at least 3 segments and 2 rings");
    }
    Mesh mesh;
    auto index = [segments](int ring, int seg) { return uint32_t(ring * (segments + 1) + seg); };
    for (int j = 0; j <= rings; ++j) {
        const double theta = kPi * double(j) / double(rings);
        for (int i = 0; i <= segments; ++i) {
            double u = double(i) / double(segments);
            if (j == 0 || j == rings) {
                u = std::min(1.0, (double(i) + 0.5) / double(segments));
            }
            const double phi = kTwoPi * u;
            const Vec3f p(float(std::sin(theta) * std::cos(phi)), float(std::cos(theta)),
                    float(std::sin(theta) * std::sin(phi)));
            mesh.positions.push_back(p);
            mesh.normals.push_back(p.normalized());
            mesh.uvs.emplace_back(float(u), float(1.0 - double(j) / double(rings)));
        }
    }
    for (int j = 0; j < rings; ++j) {
        for (int i = 0; i < segments; ++i) {
            const uint32_t a = index(j, i);
            const uint32_t b = index(j + 1, i);
            const uint32_t c = index(j + 1, i + 1);
            const uint32_t d = index(j, i + 1);
            if (j != 0) {
                mesh.faces.push_back({a, d, c});
            }
            if (j != rings - 1) {
                mesh.faces.push_back({a, c, b});
            }
        }
    }
    // Exact poles.
    for (int i = 0; i <= segments; ++i) {
        mesh.positions[index(0, i)] = Vec3f(0.0f, 1.0f, 0.0f);
        mesh.normals[index(0, i)] = Vec3f(0.0f, 1.0f, 0.0f);
        mesh.positions[index(rings, i)] = Vec3f(0.0f, -1.0f, 0.0f);
        mesh.normals[index(rings, i)] = Vec3f(0.0f, -1.0f, 0.0f);
    }
    compute_tangents(mesh);
    validate_mesh(mesh);
    return mesh;
}

} // namespace relitex
