#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "msplat/gauss_core.hpp"

namespace msplat {

struct DensityControlConfig {
    double grad_threshold = 2e-4;          // mean view-space (NDC) positional gradient
    double scale_threshold_fraction = 0.01;  // split/clone boundary, × scene extent
    double prune_opacity = 0.005;
    double split_divisor = 1.6;
    /// Clone and split stop adding splats once the set reaches this size.
    /// Zero means unlimited. Pruning is unaffected.
    std::size_t max_splats = 0;

    /// Throws ConfigError unless every field is positive.
    void validate() const;

    friend bool operator==(const DensityControlConfig&, const DensityControlConfig&) = default;
};

/// Running sum of per-iteration view-space gradient norms since the last
/// density event, counted only over iterations where the splat was visible.
struct DensityStats {
    std::vector<double> grad_sum;
    std::vector<std::uint32_t> visible_count;

    void reset(std::size_t n);
    void accumulate(std::span<const double> view_grad_norm);
    double mean(std::size_t i) const;

    friend bool operator==(const DensityStats&, const DensityStats&) = default;
};

struct DensifyResult {
    SplatSet splats;
    /// Row i of `splats` continues splat source[i]; nullopt for new splats.
    std::vector<std::optional<std::size_t>> source;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// Clone/split splats whose mean gradient exceeds the threshold, then prune
/// low-opacity splats while keeping at least one splat on every face.
/// `face_scales` holds the rest-pose triangle scale per face and
/// `scale_threshold` is the absolute world-space split/clone boundary.
DensifyResult densify_and_prune(const SplatSet& splats, const DensityStats& stats, const DensityControlConfig& cfg,
                                std::span<const double> face_scales, double scale_threshold, std::mt19937_64& rng);

/// Sets every activated opacity to min(current, ceiling).
void opacity_reset(SplatSet& splats, double ceiling = 0.01);

/// Number of faces in [0, num_faces) that carry no splat.
std::size_t uncovered_faces(const SplatSet& splats, std::size_t num_faces);

}  // namespace msplat
