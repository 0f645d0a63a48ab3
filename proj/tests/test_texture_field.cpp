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
#include <relitex/pipeline.hpp>
#include <relitex/texture_field.hpp>

#include "support/gradcheck.hpp"
#include "support/helpers.hpp"
#include "support/procedural.hpp"

#include <fstream>
#include <random>
#include <set>

using namespace relitex;
using relitex::testing::TempDir;

namespace {

FieldConfig small_config() {
    FieldConfig config;
    config.table_size_log2 = 14;
    config.finest_resolution = 512;
    return config;
}

const TextureField& default_field() {
    static const TextureField field(FieldConfig{}, 3);
    return field;
}

std::vector<float> encode_one(const TextureField& field, const Vec3f& p) {
    std::vector<float> out(32);
    const Vec3f points[1] = {p};
    field.encode(points, out);
    return out;
}

MaterialSample sample_at(const MaterialField& field, const Vec3f& p) {
    const Vec3f points[1] = {p};
    MaterialSample out[1];
    field.evaluate(points, out);
    return out[0];
}

const Mesh& sphere() {
    static const Mesh mesh = make_uv_sphere(96, 48);
    return mesh;
}

} // namespace

TEST_CASE("hash grid layout") {
    const TextureField& field = default_field();
    CHECK(field.config().feature_dim() == 32);
    CHECK(field.level_resolution(0) == 16);
    CHECK(field.level_resolution(15) >= 2040);
    CHECK(field.level_resolution(15) <= 2048);
    for (int l = 1; l < 16; ++l) {
        CHECK(field.level_resolution(l) > field.level_resolution(l - 1));
        CHECK(field.level_rows(l) <= (size_t(1) << 19));
    }
    CHECK(field.level_is_dense(0));
    CHECK_FALSE(field.level_is_dense(15));
    const size_t decoder = 32 * 32 + 32 + 8 * 32 + 8;
    CHECK(field.parameter_count() == field.table_parameter_count() + decoder);
}

TEST_CASE("corner weights are trilinear and sum to one") {
    const TextureField& field = default_field();
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (int i = 0; i < 200; ++i) {
        const Vec3f p(u(rng), u(rng), u(rng));
        for (int level = 0; level < 16; ++level) {
            uint32_t rows[8];
            float weights[8];
            field.level_corners(level, p, rows, weights);
            float sum = 0.0f;
            for (int k = 0; k < 8; ++k) {
                REQUIRE(weights[k] >= 0.0f);
                REQUIRE(rows[k] < field.level_rows(level));
                sum += weights[k];
            }
            REQUIRE(sum == doctest::Approx(1.0f).epsilon(1e-5));
        }
    }
}

TEST_CASE("encode") {
    const TextureField& field = default_field();
    SUBCASE("32 features, deterministic") {
        const Vec3f p(0.1f, -0.3f, 0.7f);
        const auto a = encode_one(field, p);
        CHECK(a.size() == 32);
        CHECK(a == encode_one(field, p));
    }
    SUBCASE("continuous inside lattice cells") {
        std::mt19937 rng(2);
        std::uniform_real_distribution<float> u(-0.9f, 0.9f);
        for (int i = 0; i < 100; ++i) {
            const Vec3f p(u(rng), u(rng), u(rng));
            const auto a = encode_one(field, p);
            const auto b = encode_one(field, p + Vec3f(1e-6f, -1e-6f, 0.0f) / std::sqrt(2.0f));
            for (size_t k = 0; k < 32; ++k) {
                REQUIRE(std::abs(a[k] - b[k]) < 1e-3f);
            }
        }
    }
    SUBCASE("points outside the bound are clamped") {
        CHECK(encode_one(field, Vec3f(1.7f, -0.2f, -3.0f)) ==
                encode_one(field, Vec3f(1.0f, -0.2f, -1.0f)));
    }
    SUBCASE("bounded by the table magnitude") {
        for (float v : encode_one(field, Vec3f(0.3f, 0.3f, -0.6f))) {
            CHECK(std::abs(v) <= 1e-4f);
        }
    }
}

TEST_CASE("decode") {
    const TextureField& field = default_field();
    SUBCASE("zero feature and zero biases give mid values") {
        const std::vector<float> zero(32, 0.0f);
        const MaterialSample m = field.decode(zero);
        CHECK(m.kc == Vec3f::Constant(0.5f));
        CHECK(m.km == 0.5f);
        CHECK(m.kr == 0.5f);
        CHECK(m.kn == Vec3f::Zero());
    }
    SUBCASE("bounded outputs") {
        std::mt19937 rng(4);
        std::normal_distribution<float> gauss(0.0f, 3.0f);
        for (int i = 0; i < 500; ++i) {
            std::vector<float> f(32);
            for (float& v : f) {
                v = gauss(rng);
            }
            const MaterialSample m = field.decode(f);
            REQUIRE((m.kc.array() > 0.0f).all());
            REQUIRE((m.kc.array() < 1.0f).all());
            REQUIRE(m.km > 0.0f);
            REQUIRE(m.km < 1.0f);
            REQUIRE(m.kr > 0.0f);
            REQUIRE(m.kr < 1.0f);
        }
    }
    SUBCASE("decoder weight gradients match finite differences") {
        TextureFieldT<double> f64 = default_field().cast<double>();
        std::mt19937 rng(5);
        std::normal_distribution<double> gauss;
        std::vector<double> feature(32);
        for (double& v : feature) {
            v = gauss(rng);
        }
        MaterialGradT<double> upstream;
        upstream.kc = Vec3d(0.3, -0.7, 1.1);
        upstream.km = -0.4;
        upstream.kr = 0.9;
        upstream.kn = Vec3d(0.5, -0.2, 0.0);
        auto objective = [&](const TextureFieldT<double>& f) {
            const MaterialSampleT<double> m = f.decode(feature);
            return upstream.kc.dot(m.kc) + upstream.km * m.km + upstream.kr * m.kr +
                    upstream.kn.dot(m.kn);
        };
        std::vector<double> hidden(32);
        std::vector<double> outputs(8);
        f64.decode(feature, hidden.data(), outputs.data());
        const size_t decoder = f64.parameter_count() - f64.w1_offset();
        std::vector<double> grads(decoder, 0.0);
        std::vector<double> d_feature(32, 0.0);
        f64.decode_backward(feature, hidden.data(), outputs.data(), upstream, grads, d_feature);
        double worst = 0.0;
        for (size_t i = 0; i < decoder; ++i) {
            double& w = f64.parameters()[f64.w1_offset() + i];
            const double original = w;
            w = original + 1e-3;
            const double plus = objective(f64);
            w = original - 1e-3;
            const double minus = objective(f64);
            w = original;
            worst = std::max(worst, relitex::testing::relative_error(grads[i], (plus - minus) / 2e-3, 1e-4));
        }
        MESSAGE("worst decoder relative error " << worst);
        CHECK(worst < 1e-2);
    }
}

TEST_CASE("field backward") {
    TextureField field(small_config(), 9);
    relitex::testing::randomize_tables(field, 10, 0.5);
    const std::vector<Vec3f> points = {Vec3f(0.2f, -0.4f, 0.5f)};
    std::vector<MaterialSample> materials(1);
    FieldCache<float> cache;
    field.forward(points, materials, &cache);
    SUBCASE("zero upstream gives zero gradients") {
        const std::vector<MaterialGrad> zero(1);
        std::vector<float> grads(field.parameter_count(), 0.0f);
        field.backward(points, cache, zero, grads);
        CHECK(std::all_of(grads.begin(), grads.end(), [](float g) { return g == 0.0f; }));
    }
    SUBCASE("a single point touches at most 8 rows per level") {
        MaterialGrad g;
        g.kc = Vec3f(1.0f, -0.5f, 0.25f);
        g.km = 0.3f;
        g.kr = -0.8f;
        g.kn = Vec3f(0.1f, 0.2f, 0.0f);
        std::vector<float> grads(field.parameter_count(), 0.0f);
        field.backward(points, cache, std::vector<MaterialGrad>{g}, grads);
        std::set<size_t> rows;
        for (size_t i = 0; i < field.table_parameter_count(); ++i) {
            if (grads[i] != 0.0f) {
                rows.insert(i / 2);
            }
        }
        MESSAGE("touched rows " << rows.size());
        CHECK(rows.size() <= 8 * 16);
        CHECK(rows.size() > 8 * 8);
    }
    SUBCASE("mismatched counts are rejected") {
        std::vector<float> grads(field.parameter_count(), 0.0f);
        CHECK_THROWS_AS(field.backward(points, cache, std::vector<MaterialGrad>(2), grads), Error);
    }
}

TEST_CASE("full-chain gradients match finite differences on table entries") {
    const PrefilteredLight light = PrefilteredLight::prefilter(make_studio_environment(1, 64),
            relitex::testing::fast_prefilter());
    const GBuffer gbuffer = rasterize(sphere(), Camera::orbit(0.4f, 0.2f,
            Camera::framing_distance(kDefaultFov), kDefaultFov, 24, 24));
    const Image target(24, 24, 3, 0.3f);
    TextureFieldT<double> reference(small_config(), 11);
    relitex::testing::randomize_tables(reference, 12, 0.5);
    const relitex::testing::FullChainProblem<double> problem64(gbuffer, light, target);

    SUBCASE("32-bit analytic gradients") {
        const TextureField f32 = reference.cast<float>();
        const TextureFieldT<double> exact = f32.cast<double>();
        const relitex::testing::FullChainProblem<float> problem32(gbuffer, light, target);
        const auto analytic = problem32.gradient(f32);
        const auto check = relitex::testing::check_full_chain(problem64, exact, analytic, 100, 100,
                1e-5, 1e-2, 13);
        MESSAGE("worst " << check.worst << " median " << check.median << " over " << check.samples);
        CHECK(check.samples == 100);
        CHECK(check.failures == 0);
    }
    SUBCASE("64-bit analytic gradients") {
        const auto analytic = problem64.gradient(reference);
        const auto check = relitex::testing::check_full_chain(problem64, reference, analytic, 100, 100,
                1e-5, 1e-5, 14);
        MESSAGE("worst " << check.worst << " median " << check.median << " over " << check.samples);
        CHECK(check.samples == 100);
        CHECK(check.failures == 0);
    }
}

TEST_CASE("Adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        std::vector<float> params{0.3f, -1.2f, 5.0f};
        const std::vector<float> before = params;
        OptimizerState state(3, AdamConfig{});
        const std::vector<float> zero(3, 0.0f);
        for (int i = 0; i < 10; ++i) {
            adam_step(state, params, zero);
        }
        CHECK(params == before);
        CHECK(state.step == 10);
    }
    SUBCASE("constant gradient moves by the learning rate per step") {
        std::vector<float> params{0.0f, 0.0f};
        OptimizerState state(2, AdamConfig{});
        const std::vector<float> grads{0.37f, -250.0f};
        for (int i = 0; i < 200; ++i) {
            adam_step(state, params, grads);
        }
        const float before0 = params[0];
        const float before1 = params[1];
        adam_step(state, params, grads);
        CHECK(before0 - params[0] == doctest::Approx(0.01).epsilon(0.05));
        CHECK(params[1] - before1 == doctest::Approx(0.01).epsilon(0.05));
    }
    SUBCASE("quadratic bowl converges") {
        std::vector<float> x{1.0f};
        OptimizerState state(1, AdamConfig{});
        for (int i = 0; i < 500; ++i) {
            const std::vector<float> g{2.0f * (x[0] - 0.25f)};
            adam_step(state, x, g);
        }
        MESSAGE("final x " << x[0]);
        CHECK(std::abs(x[0] - 0.25f) < 1e-4f);
    }
    SUBCASE("non-finite gradients are rejected before any update") {
        std::vector<float> params{1.0f, 2.0f};
        OptimizerState state(2, AdamConfig{});
        const std::vector<float> bad{0.5f, std::nanf("")};
        CHECK_THROWS_AS(adam_step(state, params, bad), NumericError);
        CHECK(params == std::vector<float>{1.0f, 2.0f});
        CHECK(state.step == 0);
        const std::vector<float> inf{std::numeric_limits<float>::infinity(), 0.0f};
        CHECK_THROWS_AS(adam_step(state, params, inf), NumericError);
    }
}

TEST_CASE("bake_uv") {
    SUBCASE("constant field gives constant maps") {
        MaterialSample m;
        m.kc = Vec3f(0.2f, 0.6f, 0.9f);
        m.km = 0.3f;
        m.kr = 0.7f;
        m.kn = Vec3f(0.4f, -0.3f, 0.0f);
        const relitex::testing::ConstantField field(m);
        const MaterialMaps maps = bake_uv(sphere(), field, 128);
        const Vec3f n = tangent_space_normal(m.kn);
        size_t covered = 0;
        for (size_t i = 0; i < maps.coverage.size(); ++i) {
            if (maps.coverage[i] == kTexelEmpty) {
                continue;
            }
            ++covered;
            for (int c = 0; c < 3; ++c) {
                REQUIRE(maps.kc.pixel(i)[c] == doctest::Approx(m.kc[c]).epsilon(1e-5));
                REQUIRE(maps.normal.pixel(i)[c] == doctest::Approx(n[c]).epsilon(1e-4));
            }
            REQUIRE(maps.km.pixel(i)[0] == doctest::Approx(m.km).epsilon(1e-5));
            REQUIRE(maps.kr.pixel(i)[0] == doctest::Approx(m.kr).epsilon(1e-5));
        }
        CHECK(covered > maps.coverage.size() / 2);
        CHECK(maps.overlapping_texels == 0);
    }
    SUBCASE("dilation fills texels within 4 of a chart") {
        Mesh mesh;
        mesh.positions = {Vec3f(0, 0, 0), Vec3f(1, 0, 0), Vec3f(0, 1, 0)};
        mesh.normals.assign(3, Vec3f(0, 0, 1));
        mesh.tangents.assign(3, Vec3f(1, 0, 0));
        mesh.uvs = {Vec2f(0.4f, 0.4f), Vec2f(0.6f, 0.4f), Vec2f(0.4f, 0.6f)};
        mesh.faces = {Face{0, 1, 2}};
        MaterialSample m;
        m.kc = Vec3f(0.8f, 0.1f, 0.1f);
        const MaterialMaps maps = bake_uv(mesh, relitex::testing::ConstantField(m), 64);
        auto at = [&](int x, int y) { return maps.coverage[size_t(y) * 64 + x]; };
        // Texel (23, 30) sits about 2 texels left of the chart's vertical edge.
        CHECK(at(23, 30) == kTexelDilated);
        CHECK(maps.kc.at(23, 30, 0) == doctest::Approx(0.8f));
        CHECK(at(30, 30) == kTexelChart);
        CHECK(at(10, 30) == kTexelEmpty);
        CHECK(maps.kc.at(10, 30, 0) == 0.0f);
    }
    SUBCASE("overlapping charts are counted") {
        Mesh mesh;
        mesh.positions = {Vec3f(0, 0, 0), Vec3f(1, 0, 0), Vec3f(0, 1, 0), Vec3f(0, 0, 1)};
        mesh.normals.assign(4, Vec3f(0, 0, 1));
        mesh.tangents.assign(4, Vec3f(1, 0, 0));
        mesh.uvs = {Vec2f(0.1f, 0.1f), Vec2f(0.9f, 0.1f), Vec2f(0.1f, 0.9f), Vec2f(0.1f, 0.1f)};
        mesh.faces = {Face{0, 1, 2}, Face{3, 1, 2}};
        const MaterialMaps maps = bake_uv(mesh, relitex::testing::ConstantField(MaterialSample{}), 64);
        CHECK(maps.overlapping_texels > 100);
    }
    SUBCASE("resolution below 64 is rejected") {
        CHECK_THROWS_AS(bake_uv(sphere(), relitex::testing::ConstantField(MaterialSample{}), 32),
                ConfigError);
    }
}

TEST_CASE("baked maps reproduce the live field") {
    const relitex::testing::ProceduralField field;
    const PrefilteredLight light = PrefilteredLight::prefilter(make_studio_environment(2, 128),
            relitex::testing::fast_prefilter());
    const MaterialMaps maps = quantize_material_maps(bake_uv(sphere(), field, 1024));
    for (float azimuth : {0.0f, 2.0f}) {
        const GBuffer g = rasterize(sphere(), Camera::orbit(azimuth, 0.3f,
                Camera::framing_distance(kDefaultFov), kDefaultFov, 256, 256));
        const RenderedImage live = render(g, field, light);
        const auto materials = sample_material_maps(maps, g);
        const RenderedImage baked = shade_image<float>(g, materials, light);
        const double p = psnr(display(baked), display(live), g.mask);
        MESSAGE("azimuth " << azimuth << " PSNR " << p);
        CHECK(p >= 30.0);
    }
}

TEST_CASE("material map files") {
    TempDir dir("maps");
    const MaterialMaps maps = bake_uv(sphere(), relitex::testing::ProceduralField(), 128);
    write_material_maps(dir.path(), maps);
    for (const char* name : {"kc.png", "km.png", "kr.png", "normal.png"}) {
        CHECK(std::filesystem::exists(dir / name));
    }
    const MaterialMaps back = read_material_maps(dir.path());
    const MaterialMaps quantized = quantize_material_maps(maps);
    CHECK(back.kc == quantized.kc);
    CHECK(back.normal == quantized.normal);
    for (size_t i = 0; i < maps.coverage.size(); ++i) {
        if (maps.coverage[i] == kTexelEmpty) {
            continue;
        }
        REQUIRE(std::abs(back.km.pixel(i)[0] - maps.km.pixel(i)[0]) <= 0.5f / 255.0f + 1e-6f);
        for (int c = 0; c < 3; ++c) {
            // 16-bit normals are far finer than the 8-bit color channels.
            REQUIRE(std::abs(back.normal.pixel(i)[c] - maps.normal.pixel(i)[c]) < 1e-4f);
        }
    }
    // Neutral bump encodes as (0.5, 0.5, 1).
    MaterialMaps flat = bake_uv(sphere(), relitex::testing::ConstantField(MaterialSample{}), 64);
    write_material_maps(dir.path(), flat);
    const Image normal_png = read_png(dir / "normal.png");
    const size_t mid = size_t(32) * 64 + 32;
    CHECK(normal_png.pixel(mid)[0] == doctest::Approx(0.5f).epsilon(1e-4));
    CHECK(normal_png.pixel(mid)[1] == doctest::Approx(0.5f).epsilon(1e-4));
    CHECK(normal_png.pixel(mid)[2] == doctest::Approx(1.0f));
}

TEST_CASE("checkpoint") {
    TempDir dir("ckpt");
    TextureField field(small_config(), 21);
    relitex::testing::randomize_tables(field, 22, 0.1);
    save_checkpoint(dir / "field.rlxf", field);
    const TextureField back = load_checkpoint(dir / "field.rlxf");
    CHECK(back.config() == field.config());
    CHECK(std::equal(back.parameters().begin(), back.parameters().end(), field.parameters().begin()));

    const std::vector<uint8_t> bytes = read_file(dir / "field.rlxf");
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "RLXFIELD");
    SUBCASE("truncated") {
        write_file(dir / "cut.rlxf", std::span(bytes).first(bytes.size() - 7));
        CHECK_THROWS_AS(load_checkpoint(dir / "cut.rlxf"), Error);
    }
    SUBCASE("wrong magic") {
        std::vector<uint8_t> bad = bytes;
        bad[0] = 'X';
        write_file(dir / "bad.rlxf", bad);
        CHECK_THROWS_AS(load_checkpoint(dir / "bad.rlxf"), Error);
    }
    SUBCASE("trailing bytes") {
        std::vector<uint8_t> longer = bytes;
        longer.push_back(0);
        write_file(dir / "long.rlxf", longer);
        CHECK_THROWS_AS(load_checkpoint(dir / "long.rlxf"), Error);
    }
}

TEST_CASE("field config validation") {
    FieldConfig c;
    c.hidden_width = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = FieldConfig{};
    c.base_resolution = 4096;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = FieldConfig{};
    c.table_size_log2 = 40;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(FieldConfig{}.validate());
}

TEST_CASE("seeded initialization") {
    const TextureField a(small_config(), 5);
    const TextureField b(small_config(), 5);
    const TextureField c(small_config(), 6);
    CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
    CHECK_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
    const auto params = a.parameters();
    for (size_t i = 0; i < a.table_parameter_count(); ++i) {
        REQUIRE(std::abs(params[i]) <= 1e-4f);
    }
    for (size_t i = a.b1_offset(); i < a.w2_offset(); ++i) {
        REQUIRE(params[i] == 0.0f);
    }
    for (size_t i = a.b2_offset(); i < a.parameter_count(); ++i) {
        REQUIRE(params[i] == 0.0f);
    }
    // Sanity: the initial field is a mid-gray material.
    const MaterialSample m = sample_at(a, Vec3f(0.1f, 0.2f, 0.3f));
    CHECK(m.kc.x() == doctest::Approx(0.5f).epsilon(0.01));
}
