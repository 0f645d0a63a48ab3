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

#include <random>

namespace relitex {

void OptimConfig::validate() const {
    if (total_iterations < 1) {
        throw ConfigError("total iterations must be positive");
    }
    if (warmup_iterations < 0 || warmup_iterations > total_iterations) {
        throw ConfigError("warmup iterations must be in [0, total iterations]");
    }
    if (batch < 1) {
        throw ConfigError("batch must be positive");
    }
    if (!(lr > 0.0) || !(lambda_recon > 0.0) || !(lambda_reg > 0.0)) {
        throw ConfigError("learning rate and loss weights must be positive");
    }
    if (!(t_min > 0.0 && t_min < t_max && t_max <= 1.0)) {
        throw ConfigError("noise levels must satisfy 0 < t_min < t_max <= 1");
    }
    if (!std::isfinite(cfg)) {
        throw ConfigError("cfg scale must be finite");
    }
    if (reg_samples < 1 || !(reg_epsilon > 0.0)) {
        throw ConfigError("regularizer samples and epsilon must be positive");
    }
}

const char* to_string(IterationKind kind) {
    switch (kind) {
    case IterationKind::WarmupRecon:
        return "warmup-recon";
    case IterationKind::Recon:
        return "recon";
    case IterationKind::SdsCanonical:
        return "sds-canonical";
    case IterationKind::SdsRandom:
        return "sds-random";
    }
    return "unknown";
}

int sds_iteration_count(const OptimConfig& config) {
    return (config.total_iterations - config.warmup_iterations) / 2;
}

IterationPlan schedule(int iteration, const OptimConfig& config, const CanonicalSetup& setup,
        size_t pool_size) {
    if (iteration < 0 || iteration >= config.total_iterations) {
        throw ConfigError("iteration " + std::to_string(iteration) + " is outside [0, " +
                std::to_string(config.total_iterations) + ")");
    }
    IterationPlan plan;
    plan.iteration = iteration;
    plan.sds_count = sds_iteration_count(config);
    const auto canonical = [&] {
        plan.cameras.assign(setup.cameras.begin(), setup.cameras.end());
    };
    if (iteration < config.warmup_iterations) {
        plan.kind = IterationKind::WarmupRecon;
        canonical();
        return plan;
    }
    // After warm-up: recon, SDS, recon, SDS, ...
    const int j = iteration - config.warmup_iterations;
    if (j % 2 == 0) {
        plan.kind = IterationKind::Recon;
        canonical();
        return plan;
    }
    const int k = (j - 1) / 2;
    const int n = plan.sds_count;
    const double f = n > 1 ? double(k) / double(n - 1) : 0.0;
    plan.sds_index = k;
    plan.t = std::lerp(config.t_max, config.t_min, f);
    plan.s = std::lerp(1.0, 0.0, f);
    if (k % 4 == 0) {
        plan.kind = IterationKind::SdsCanonical;
        canonical();
        return plan;
    }
    plan.kind = IterationKind::SdsRandom;
    if (pool_size == 0) {
        throw ConfigError("the lighting pool is empty");
    }
    std::mt19937_64 rng(mix_seed(config.seed, uint64_t(iteration)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Camera& reference = setup.cameras[0];
    const float distance = (reference.position - reference.target).norm();
    for (int b = 0; b < config.batch; ++b) {
        const float azimuth = float(kTwoPi * unit(rng));
        const float elevation = float(kRandomElevationMin +
                (kRandomElevationMax - kRandomElevationMin) * unit(rng));
        plan.cameras.push_back(Camera::orbit(azimuth, elevation, distance, reference.fov_y,
                reference.width, reference.height, reference.target));
        LightChoice light;
        light.pool_index = std::min(pool_size - 1, size_t(unit(rng) * double(pool_size)));
        light.rotation = float(kTwoPi * unit(rng));
        light.scale = float(0.5 + unit(rng));
        plan.lights.push_back(light);
    }
    return plan;
}

} // namespace relitex
