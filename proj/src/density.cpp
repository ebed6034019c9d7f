#include "msplat/density.hpp"

#include <algorithm>
#include <cmath>

#include "msplat/errors.hpp"

namespace msplat {

void DensityControlConfig::validate() const {
    if (!(grad_threshold > 0.0) || !(scale_threshold_fraction > 0.0) || !(prune_opacity > 0.0) ||
        !(split_divisor > 0.0)) {
        throw ConfigError("density control thresholds must be positive");
    }
}

void DensityStats::reset(std::size_t n) {
    grad_sum.assign(n, 0.0);
    visible_count.assign(n, 0);
}

void DensityStats::accumulate(std::span<const double> view_grad_norm) {
    for (std::size_t i = 0; i < view_grad_norm.size(); ++i) {
        if (view_grad_norm[i] >= 0.0) {
            grad_sum[i] += view_grad_norm[i];
            ++visible_count[i];
        }
    }
}

double DensityStats::mean(std::size_t i) const {
    return visible_count[i] == 0 ? 0.0 : grad_sum[i] / visible_count[i];
}

DensifyResult densify_and_prune(const SplatSet& splats, const DensityStats& stats, const DensityControlConfig& cfg,
                                std::span<const double> face_scales, double scale_threshold, std::mt19937_64& rng) {
    const std::size_t n = splats.size();
    std::vector<std::size_t> keep;
    std::vector<std::size_t> clones;
    std::vector<std::size_t> splits;
    for (std::size_t i = 0; i < n; ++i) {
        const bool over_budget = cfg.max_splats > 0 && n + clones.size() + splits.size() >= cfg.max_splats;
        if (over_budget || stats.mean(i) <= cfg.grad_threshold) {
            keep.push_back(i);
            continue;
        }
        const double world_scale = face_scales[splats.parent_face[i]] * splats.scale(i).maxCoeff();
        if (world_scale > scale_threshold) {
            splits.push_back(i);
        } else {
            keep.push_back(i);
            clones.push_back(i);
        }
    }

    std::vector<std::size_t> order = keep;
    order.insert(order.end(), clones.begin(), clones.end());
    SplatSet grown = splats.gather(order);
    std::vector<std::optional<std::size_t>> source(keep.begin(), keep.end());
    source.resize(order.size());  // clones start with fresh moments

    std::normal_distribution<double> normal(0.0, 1.0);
    for (const std::size_t i : splits) {
        const GaussianSplat parent = splats.get(i);
        const Vec3 s = parent.scale();
        const Mat3 r = quat_to_matrix(parent.rot_local);
        for (int child = 0; child < 2; ++child) {
            GaussianSplat c = parent;
            const Vec3 sample(normal(rng), normal(rng), normal(rng));
            c.mu_local = parent.mu_local + r * s.cwiseProduct(sample);
            c.log_scale = (s / cfg.split_divisor).array().log();
            grown.push_back(c);
            source.emplace_back(std::nullopt);
        }
    }

    DensifyResult result;
    result.cloned = clones.size();
    result.split = splits.size();

    std::vector<std::size_t> per_face(face_scales.size(), 0);
    for (const std::uint32_t f : grown.parent_face) {
        ++per_face[f];
    }
    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < grown.size(); ++i) {
        const std::uint32_t f = grown.parent_face[i];
        if (grown.opacity(i) < cfg.prune_opacity && per_face[f] > 1) {
            --per_face[f];
            ++result.pruned;
            continue;
        }
        survivors.push_back(i);
    }
    result.splats = grown.gather(survivors);
    result.source.reserve(survivors.size());
    for (const std::size_t i : survivors) {
        result.source.push_back(source[i]);
    }
    return result;
}

void opacity_reset(SplatSet& splats, double ceiling) {
    const double ceiling_logit = logit(ceiling);
    for (double& l : splats.opacity_logit) {
        if (sigmoid(l) > ceiling) {
            l = ceiling_logit;
        }
    }
}

std::size_t uncovered_faces(const SplatSet& splats, std::size_t num_faces) {
    std::vector<bool> covered(num_faces, false);
    for (const std::uint32_t f : splats.parent_face) {
        if (f < num_faces) {
            covered[f] = true;
        }
    }
    return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), false));
}

}  // namespace msplat
