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


#include <doctest.h>

#include <relitex/error.hpp>
#include <relitex/geometry.hpp>

#include "support/helpers.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <fstream>

using namespace relitex;
using relitex::testing::parse_obj_text;

namespace {

const char* kCubeObj = R"(# unit cube with per-face normals
v -0.5 -0.5 -0.5
v  0.5 -0.5 -0.5
v  0.5  0.5 -0.5
v -0.5  0.5 -0.5
v -0.5 -0.5  0.5
v  0.5 -0.5  0.5
v  0.5  0.5  0.5
v -0.5  0.5  0.5
vt 0 0
vt 1 0
vt 1 1
vt 0 1
vn  0  0 -1
vn  0  0  1
vn -1  0  0
vn  1  0  0
vn  0 -1  0
vn  0  1  0
f 1/1/1 3/3/1 2/2/1
f 1/1/1 4/4/1 3/3/1
f 5/1/2 6/2/2 7/3/2
f 5/1/2 7/3/2 8/4/2
f 1/1/3 5/2/3 8/3/3
f 1/1/3 8/3/3 4/4/3
f 2/1/4 3/4/4 7/3/4
f 2/1/4 7/3/4 6/2/4
f 1/1/5 2/2/5 6/3/5
f 1/1/5 6/3/5 5/4/5
f 4/1/6 8/4/6 7/3/6
f 4/1/6 7/3/6 3/2/6
)";

Mesh unit_area_triangle() {
    Mesh mesh;
    const float s = std::sqrt(2.0f);
    mesh.positions = {Vec3f(0, 0, 0), Vec3f(s, 0, 0), Vec3f(0, s, 0)};
    mesh.normals.assign(3, Vec3f(0, 0, 1));
    mesh.tangents.assign(3, Vec3f(1, 0, 0));
    mesh.uvs = {Vec2f(0, 0), Vec2f(1, 0), Vec2f(0, 1)};
    mesh.faces = {Face{0, 1, 2}};
    return mesh;
}

void check_frames(const Mesh& mesh) {
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
        REQUIRE(std::abs(mesh.normals[i].norm() - 1.0f) < 1e-4f);
        REQUIRE(std::abs(mesh.tangents[i].norm() - 1.0f) < 1e-4f);
        REQUIRE(std::abs(mesh.tangents[i].dot(mesh.normals[i])) < 1e-3f);
    }
}

} // namespace

TEST_CASE("cube with per-face normals keeps 12 axis-aligned faces") {
    const Mesh mesh = parse_obj_text(kCubeObj);
    CHECK(mesh.face_count() == 12);
    for (const Vec3f& n : mesh.normals) {
        const float largest = n.cwiseAbs().maxCoeff();
        CHECK(largest == doctest::Approx(1.0f).epsilon(1e-6));
        CHECK(n.cwiseAbs().sum() == doctest::Approx(1.0f).epsilon(1e-6));
    }
    check_frames(mesh);
}

TEST_CASE("positions are centered and scaled into the unit sphere") {
    const Mesh mesh = parse_obj_text(kCubeObj);
    float largest = 0.0f;
    Vec3f center = Vec3f::Zero();
    for (const Vec3f& p : mesh.positions) {
        largest = std::max(largest, p.norm());
        center += p;
    }
    center /= float(mesh.vertex_count());
    CHECK(largest == doctest::Approx(1.0f).epsilon(1e-5));
    CHECK(center.norm() < 1e-5f);
}

TEST_CASE("single triangle tangent is the normalized dP/dU") {
    const Mesh mesh = parse_obj_text(R"(
v 0 0 0
v 1 1 0
v 0 1 1
vt 0 0
vt 1 0
vt 0 1
f 1/1 2/2 3/3
)");
    REQUIRE(mesh.vertex_count() == 3);
    // dP/dU = p1 - p0 for these UVs and it is already orthogonal to the face normal.
    const Vec3f expected = Vec3f(1, 1, 0).normalized();
    for (const Vec3f& t : mesh.tangents) {
        CHECK((t - expected).norm() < 1e-5f);
    }
    const Vec3f normal = Vec3f(1, -1, 1).normalized();
    for (const Vec3f& n : mesh.normals) {
        CHECK((n - normal).norm() < 1e-5f);
    }
}

TEST_CASE("degenerate UV triangle still gets an orthogonal tangent") {
    const Mesh mesh = parse_obj_text(R"(
v 0 0 0
v 1 0 0
v 0 1 0
vt 0.5 0.5
f 1/1 2/1 3/1
)");
    check_frames(mesh);
}

TEST_CASE("OBJ errors") {
    SUBCASE("quad face") {
        try {
            parse_obj_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1 4/1\n");
            FAIL("expected MeshError");
        } catch (const MeshError& e) {
            CHECK(std::string(e.what()).find("non-triangulated") != std::string::npos);
        }
    }
    SUBCASE("missing UVs") {
        try {
            parse_obj_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
            FAIL("expected MeshError");
        } catch (const MeshError& e) {
            CHECK(std::string(e.what()).find("missing UVs") != std::string::npos);
        }
    }
    SUBCASE("index out of range") {
        CHECK_THROWS_AS(parse_obj_text("v 0 0 0\nvt 0 0\nf 1/1 2/1 3/1\n"), MeshError);
    }
    SUBCASE("missing file names the path") {
        try {
            load_mesh("/nonexistent/dir/helmet.obj");
            FAIL("expected MeshError");
        } catch (const MeshError& e) {
            CHECK(std::string(e.what()).find("/nonexistent/dir/helmet.obj") != std::string::npos);
        }
    }
    SUBCASE("no faces") {
        CHECK_THROWS_AS(parse_obj_text("v 0 0 0\n"), MeshError);
    }
}

TEST_CASE("write_obj and load_mesh round trip") {
    relitex::testing::TempDir dir("geometry");
    const Mesh sphere = make_uv_sphere(24, 12);
    write_obj(dir / "sphere.obj", sphere);
    const Mesh loaded = load_mesh(dir / "sphere.obj");
    CHECK(loaded.face_count() == sphere.face_count());
    CHECK(loaded.surface_area() == doctest::Approx(sphere.surface_area()).epsilon(1e-3));
    check_frames(loaded);
}

TEST_CASE("uv sphere frames satisfy the mesh invariants") {
    const Mesh sphere = make_uv_sphere(48, 24);
    check_frames(sphere);
    CHECK_NOTHROW(validate_mesh(sphere));
}

TEST_CASE("sample_surface on a unit-area triangle") {
    const Mesh mesh = unit_area_triangle();
    REQUIRE(mesh.surface_area() == doctest::Approx(1.0f).epsilon(1e-5));
    const auto points = sample_surface(mesh, 1000, 7);
    REQUIRE(points.size() == 1000);
    Vec3f mean = Vec3f::Zero();
    for (const SurfacePoint& p : points) {
        const Vec3f& b = p.barycentric;
        CHECK((b.array() >= 0.0f).all());
        CHECK((b.array() <= 1.0f).all());
        CHECK(b.sum() == doctest::Approx(1.0f).epsilon(1e-5));
        const Mat3f gram = p.frame.transpose() * p.frame;
        CHECK((gram - Mat3f::Identity()).cwiseAbs().maxCoeff() < 1e-4f);
        mean += p.position;
    }
    mean /= 1000.0f;
    const Vec3f centroid = (mesh.positions[0] + mesh.positions[1] + mesh.positions[2]) / 3.0f;
    CHECK((mean - centroid).norm() < 0.05f);
}

TEST_CASE("sample_surface is seed deterministic") {
    const Mesh sphere = make_uv_sphere(16, 8);
    const auto a = sample_surface(sphere, 500, 42);
    const auto b = sample_surface(sphere, 500, 42);
    const auto c = sample_surface(sphere, 500, 43);
    bool same = true;
    bool differs = false;
    for (size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].position == b[i].position && a[i].face == b[i].face;
        differs = differs || a[i].position != c[i].position;
    }
    CHECK(same);
    CHECK(differs);
    CHECK_THROWS_AS(sample_surface(sphere, 0, 1), MeshError);
}

TEST_CASE("area ratio 9:1 splits samples 9000/1000") {
    Mesh mesh;
    mesh.positions = {Vec3f(0, 0, 0), Vec3f(3, 0, 0), Vec3f(0, 3, 0), Vec3f(5, 0, 0),
            Vec3f(6, 0, 0), Vec3f(5, 1, 0)};
    mesh.normals.assign(6, Vec3f(0, 0, 1));
    mesh.tangents.assign(6, Vec3f(1, 0, 0));
    mesh.uvs.assign(6, Vec2f(0.5f, 0.5f));
    mesh.faces = {Face{0, 1, 2}, Face{3, 4, 5}};
    const auto points = sample_surface(mesh, 10000, 3);
    size_t first = 0;
    for (const SurfacePoint& p : points) {
        first += p.face == 0 ? 1 : 0;
    }
    CHECK(std::abs(int(first) - 9000) <= 200);
    CHECK(std::abs(int(points.size() - first) - 1000) <= 200);
}

TEST_CASE("sample_surface passes a chi-square area-uniformity test") {
    const Mesh sphere = make_uv_sphere(12, 6);
    const size_t count = 10000;
    const auto points = sample_surface(sphere, count, 11);
    std::vector<double> observed(sphere.face_count(), 0.0);
    for (const SurfacePoint& p : points) {
        observed[p.face] += 1.0;
    }
    const double area = sphere.surface_area();
    double statistic = 0.0;
    size_t cells = 0;
    for (size_t f = 0; f < sphere.face_count(); ++f) {
        const double expected = double(count) * sphere.face_area(f) / area;
        if (expected <= 0.0) {
            continue;
        }
        statistic += (observed[f] - expected) * (observed[f] - expected) / expected;
        ++cells;
    }
    const boost::math::chi_squared dist(double(cells - 1));
    const double p_value = 1.0 - boost::math::cdf(dist, statistic);
    CHECK(p_value > 0.01);
}

TEST_CASE("zero-area mesh is rejected by the sampler") {
    Mesh mesh = unit_area_triangle();
    mesh.positions[2] = mesh.positions[1];
    CHECK_THROWS_AS(sample_surface(mesh, 10, 0), MeshError);
}
