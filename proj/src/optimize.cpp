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

#include <relitex/pipeline.hpp>

#include <relitex/error.hpp>

#include <spdlog/spdlog.h>
#include <tbb/parallel_for.h>

#include <cstdio>
#include <fstream>

namespace relitex {

LightingPool LightingPool::from_environments(const std::vector<EnvironmentLight>& environments,
        const PrefilterSettings& settings) {
    if (environments.empty()) {
        throw ConfigError("the lighting pool needs at least one environment");
    }
    LightingPool pool;
    for (const EnvironmentLight& env : environments) {
        pool.lights.push_back(PrefilteredLight::prefilter(env, settings));
    }
    return pool;
}

LightingPool LightingPool::studio(const PrefilterSettings& settings) {
    std::vector<EnvironmentLight> environments;
    for (int variant = 0; variant < 6; ++variant) {
        environments.push_back(make_studio_environment(variant));
    }
    return from_environments(environments, settings);
}

CanonicalSetup make_canonical_setup(const Mesh& mesh, const PrefilteredLight& light, int resolution,
        float fov_y) {
    CanonicalSetup setup;
    setup.light = light;
    const float distance = Camera::framing_distance(fov_y);
    for (int v = 0; v < 4; ++v) {
        setup.cameras[size_t(v)] = Camera::orbit(float(v) * float(kPi) * 0.5f, 0.0f, distance, fov_y,
                resolution, resolution);
        setup.gbuffers[size_t(v)] = rasterize(mesh, setup.cameras[size_t(v)]);
    }
    return setup;
}

ReferenceSet stage1_reference(const CanonicalSetup& setup, const std::string& prompt,
        const std::string& negative_prompt, GuidanceBackend& backend, double cfg_scale,
        uint64_t seed) {
    ReferenceSet ref;
    std::array<Image, 4> tiles;
    GuidanceRequest request;
    request.mode = GuidanceMode::Generate;
    for (size_t v = 0; v < 4; ++v) {
        ref.conditioning[v] = conditioning_image(setup.gbuffers[v], setup.light);
        tiles[v] = ref.conditioning[v].image;
        request.views.push_back({setup.cameras[v], setup.light});
    }
    request.prompt = prompt;
    request.negative_prompt = negative_prompt;
    request.cond_image = assemble_grid(tiles);
    request.strength = 1.0;
    request.cfg_scale = cfg_scale;
    request.seed = seed;
    ref.grid = backend.request(request).image;
    if (ref.grid.width != request.cond_image.width || ref.grid.height != request.cond_image.height ||
            ref.grid.channels != 3) {
        throw BackendError(BackendErrorKind::Schema, "generated grid does not match the request");
    }
    ref.views = split_grid(ref.grid);
    return ref;
}

std::string log_header() { return "iteration,kind,t,s,loss_recon,loss_sds,loss_reg,loss_total,skipped"; }

std::string format_log_line(const IterationLog& e) {
    char ts[64] = "";
    if (e.kind == IterationKind::SdsCanonical || e.kind == IterationKind::SdsRandom) {
        std::snprintf(ts, sizeof(ts), "%.17g,%.17g", e.t, e.s);
    } else {
        std::snprintf(ts, sizeof(ts), ",");
    }
    char line[256];
    std::snprintf(line, sizeof(line), "%d,%s,%s,%.9g,%.9g,%.9g,%.9g,%d", e.iteration,
            to_string(e.kind), ts, e.recon, e.sds, e.reg, e.total, e.skipped ? 1 : 0);
    return line;
}

Image display(const RenderedImage& render) { return tonemap_image(render.pixels); }

namespace {

struct View {
    const GBuffer* gbuffer = nullptr;
    GBuffer owned;
    PrefilteredLight light;
    size_t offset = 0;   // into the concatenated per-point arrays
};

/// Multiplies a display-space gradient by the tone-map derivative at the linear pixels.
void to_linear_gradient(const Image& linear, Image& gradient, float weight) {
    for (size_t i = 0; i < gradient.pixels.size(); ++i) {
        gradient.pixels[i] *= weight * tonemap_derivative(linear.pixels[i]);
    }
}

Image masked_reference(const Image& reference, const GBuffer& gbuffer) {
    if (reference.width != gbuffer.width || reference.height != gbuffer.height ||
            reference.channels != 3) {
        throw ConfigError("reference view does not match the render resolution");
    }
    Image out = reference;
    const float background = tonemap(kBackground);
    for (size_t i = 0; i < out.pixel_count(); ++i) {
        if (!gbuffer.mask[i]) {
            std::fill_n(out.pixel(i), 3, background);
        }
    }
    return out;
}

void write_snapshot(const std::filesystem::path& dir, int iteration, const TextureField& field,
        const CanonicalSetup& setup) {
    std::array<Image, 4> tiles;
    for (size_t v = 0; v < 4; ++v) {
        tiles[v] = display(render(setup.gbuffers[v], field, setup.light));
    }
    char name[64];
    std::snprintf(name, sizeof(name), "snapshot_%04d.png", iteration);
    write_png(dir / name, assemble_grid(tiles));
}

} // namespace

OptimizeResult optimize(const Mesh& mesh, TextureField& field, const CanonicalSetup& setup,
        const ReferenceSet& reference, const OptimConfig& config, GuidanceBackend& backend,
        const LightingPool& pool, const OptimizeOptions& options) {
    config.validate();
    if (pool.size() == 0) {
        throw ConfigError("the lighting pool is empty");
    }
    std::array<Image, 4> targets;
    for (size_t v = 0; v < 4; ++v) {
        targets[v] = masked_reference(reference.views[v], setup.gbuffers[v]);
    }

    std::ofstream log_file;
    if (!options.log_path.empty()) {
        if (options.log_path.has_parent_path()) {
            std::filesystem::create_directories(options.log_path.parent_path());
        }
        log_file.open(options.log_path);
        if (!log_file) {
            throw ConfigError("cannot write run log " + options.log_path.string());
        }
        log_file << log_header() << '\n';
    }
    if (!options.snapshot_dir.empty()) {
        std::filesystem::create_directories(options.snapshot_dir);
    }

    OptimizerState state(field.parameter_count(), AdamConfig{config.lr});
    std::vector<float> grads(field.parameter_count());
    OptimizeResult result;

    for (int it = 0; it < config.total_iterations; ++it) {
        const IterationPlan plan = schedule(it, config, setup, pool.size());
        IterationLog entry;
        entry.iteration = it;
        entry.kind = plan.kind;
        entry.t = plan.t;
        entry.s = plan.s;

        // Views and the concatenated surface points they shade.
        std::vector<View> views(plan.cameras.size());
        std::vector<Vec3f> points;
        for (size_t b = 0; b < views.size(); ++b) {
            View& view = views[b];
            if (plan.lights.empty()) {
                view.gbuffer = &setup.gbuffers[b];
                view.light = setup.light;
            } else {
                view.owned = rasterize(mesh, plan.cameras[b]);
                view.gbuffer = &view.owned;
                const LightChoice& choice = plan.lights[b];
                view.light = pool.lights[choice.pool_index].transformed(choice.rotation, choice.scale);
            }
            view.offset = points.size();
            const std::vector<Vec3f> p = covered_positions(*view.gbuffer);
            points.insert(points.end(), p.begin(), p.end());
        }
        std::vector<MaterialSample> materials(points.size());
        FieldCache<float> cache;
        field.forward(points, materials, &cache);

        const float inv_batch = 1.0f / float(views.size());
        std::vector<RenderedImage> renders(views.size());
        std::vector<Image> pixel_grads(views.size());
        for (size_t b = 0; b < views.size(); ++b) {
            const std::span<const MaterialSample> m(materials.data() + views[b].offset,
                    views[b].gbuffer->covered.size());
            renders[b] = shade_image<float>(*views[b].gbuffer, m, views[b].light);
        }

        if (!plan.is_sds()) {
            for (size_t b = 0; b < views.size(); ++b) {
                ImageLoss<float> loss = recon_loss<float>(display(renders[b]), targets[b],
                        views[b].gbuffer->mask);
                entry.recon += double(loss.value) * inv_batch;
                pixel_grads[b] = std::move(loss.gradient);
                to_linear_gradient(renders[b].pixels, pixel_grads[b],
                        float(config.lambda_recon) * inv_batch);
            }
        } else {
            std::vector<SdsResult> sds(views.size());
            std::vector<Image> shown(views.size());
            try {
                tbb::parallel_for(size_t(0), views.size(), [&](size_t b) {
                    shown[b] = display(renders[b]);
                    const ConditioningImage cond = conditioning_image(*views[b].gbuffer, views[b].light);
                    SdsParams params;
                    params.prompt = options.prompt;
                    params.negative_prompt = options.negative_prompt;
                    params.t = plan.t;
                    params.strength = plan.s;
                    params.cfg_scale = config.cfg;
                    params.seed = mix_seed(config.seed, uint64_t(it) * 64 + b);
                    sds[b] = sds_gradient(shown[b], cond, params, backend);
                });
            } catch (const BackendError& e) {
                spdlog::warn("iteration {}: skipping after guidance failure: {}", it, e.what());
                entry.skipped = true;
            }
            if (!entry.skipped) {
                for (size_t b = 0; b < views.size(); ++b) {
                    double sq = 0.0;
                    for (float g : sds[b].gradient.pixels) {
                        sq += double(g) * double(g);
                    }
                    entry.sds += 0.5 * sq / double(sds[b].gradient.pixels.size()) * inv_batch;
                    pixel_grads[b] = std::move(sds[b].gradient);
                    to_linear_gradient(renders[b].pixels, pixel_grads[b], inv_batch);
                }
            }
        }
        if (entry.skipped) {
            ++result.skipped;
            result.log.push_back(entry);
            if (log_file) {
                log_file << format_log_line(entry) << '\n';
            }
            if (options.on_iteration) {
                options.on_iteration(entry);
            }
            continue;
        }

        const RegLoss reg = smoothness_reg(field, mesh, config.reg_samples, config.reg_epsilon,
                mix_seed(config.seed, uint64_t(it) ^ 0x5245474cULL));
        entry.reg = reg.value;
        entry.total = config.lambda_recon * entry.recon + entry.sds + config.lambda_reg * entry.reg;
        if (!std::isfinite(entry.total)) {
            throw NumericError("iteration " + std::to_string(it) + " (" + to_string(plan.kind) +
                    "): non-finite loss (recon " + std::to_string(entry.recon) + ", sds " +
                    std::to_string(entry.sds) + ", reg " + std::to_string(entry.reg) + ")");
        }

        std::fill(grads.begin(), grads.end(), 0.0f);
        std::vector<MaterialGrad> material_grads;
        material_grads.reserve(points.size());
        for (size_t b = 0; b < views.size(); ++b) {
            const std::span<const MaterialSample> m(materials.data() + views[b].offset,
                    views[b].gbuffer->covered.size());
            const std::vector<MaterialGrad> g =
                    shade_image_backward<float>(*views[b].gbuffer, m, views[b].light, pixel_grads[b]);
            material_grads.insert(material_grads.end(), g.begin(), g.end());
        }
        field.backward(points, cache, material_grads, grads);

        std::vector<MaterialSample> reg_materials(reg.points.size());
        FieldCache<float> reg_cache;
        field.forward(reg.points, reg_materials, &reg_cache);
        std::vector<MaterialGrad> reg_grads = reg.gradients;
        for (MaterialGrad& g : reg_grads) {
            g.kc *= float(config.lambda_reg);
        }
        field.backward(reg.points, reg_cache, reg_grads, grads);

        try {
            adam_step(state, field.parameters(), grads);
        } catch (const NumericError& e) {
            throw NumericError("iteration " + std::to_string(it) + " (" + to_string(plan.kind) +
                    "): " + e.what());
        }

        result.log.push_back(entry);
        if (log_file) {
            log_file << format_log_line(entry) << '\n';
            log_file.flush();
        }
        if (options.on_iteration) {
            options.on_iteration(entry);
        }
        const bool last = it + 1 == config.total_iterations;
        if (!options.snapshot_dir.empty() && options.snapshot_every > 0 &&
                ((it + 1) % options.snapshot_every == 0 || last)) {
            write_snapshot(options.snapshot_dir, it + 1, field, setup);
        }
    }
    return result;
}

} // namespace relitex
