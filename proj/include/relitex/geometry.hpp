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

#ifndef RELITEX_GEOMETRY_HPP
#define RELITEX_GEOMETRY_HPP

#include <relitex/math.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace relitex {

using Face = std::array<uint32_t, 3>;

/// Indexed triangle mesh. All per-vertex arrays have the same length.
struct Mesh {
    std::vector<Vec3f> positions;
    std::vector<Vec3f> normals;
    std::vector<Vec3f> tangents;
    std::vector<Vec2f> uvs;
    std::vector<Face> faces;

    size_t vertex_count() const { return positions.size(); }
    size_t face_count() const { return faces.size(); }
    float face_area(size_t face) const;
    float surface_area() const;
};

struct SurfacePoint {
    Vec3f position;
    Vec3f normal;
    Mat3f frame;        // columns: tangent, bitangent, normal
    Vec2f uv;
    uint32_t face = 0;
    Vec3f barycentric;
};

/// Reads a Wavefront OBJ (v/vt/vn/f). Only triangles are accepted and UVs are required.
/// Normals are area-weighted when absent, tangents come from UV gradients, and the
/// result is centered and scaled into the unit sphere.
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_obj(std::istream& in, std::string_view name = "<stream>");

void write_obj(const std::filesystem::path& path, const Mesh& mesh);

/// Area-weighted vertex normals. Vertices sharing a position share the normal.
void compute_normals(Mesh& mesh);

/// Per-vertex tangents from averaged per-face dP/dU, Gram-Schmidt against the normal.
/// Degenerate UV triangles contribute nothing; vertices left without a tangent get an
/// arbitrary unit vector orthogonal to the normal.
void compute_tangents(Mesh& mesh);

void normalize_to_unit_sphere(Mesh& mesh);

/// Throws MeshError if the mesh violates its invariants.
void validate_mesh(const Mesh& mesh);

/// Area-uniform surface samples, deterministic for a given seed.
std::vector<SurfacePoint> sample_surface(const Mesh& mesh, size_t count, uint64_t seed);

SurfacePoint surface_point(const Mesh& mesh, uint32_t face, const Vec3f& barycentric);

/// Latitude/longitude sphere of radius 1 with a UV seam at u = 0/1.
Mesh make_uv_sphere(int segments, int rings);

} // namespace relitex

#endif // RELITEX_GEOMETRY_HPP
