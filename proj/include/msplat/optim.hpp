#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msplat {

/// Bias-corrected Adam state for one parameter group.
struct AdamGroup {
    std::string name;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
    std::int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    friend bool operator==(const AdamGroup&, const AdamGroup&) = default;
};

/// One Adam update. Resizes empty moment buffers; throws ShapeMismatchError
/// on incongruent sizes and NumericError (naming the group and index) on a
/// non-finite gradient, leaving `params` untouched.
void adam_step(std::span<double> params, std::span<const double> grads, AdamGroup& state, double lr);

/// Remaps per-element moments after the owning parameter array was
/// reordered: row i of the new array came from `source[i]` (nullopt = new,
/// zero moments). `width` is the number of scalars per row.
void remap_moments(AdamGroup& state, std::span<const std::optional<std::size_t>> source, std::size_t width);

/// Zeros the moments of every row (used after an opacity reset).
void reset_moments(AdamGroup& state);

/// Iteration schedule. Iterations are 1-based; events are evaluated after
/// the optimizer step of iteration `iter`.
struct Schedule {
    std::int64_t total_iters = 50000;
    std::int64_t densify_interval = 500;
    std::int64_t densify_from = 500;
    std::int64_t opacity_reset_interval = 5000;
    std::int64_t opacity_reset_from = 10000;
    std::int64_t density_control_end = 35000;
    double position_lr_init = 8e-3;
    double position_lr_final = 1e-5;

    /// Throws ConfigError on non-positive intervals or end > total.
    void validate() const;

    /// Log-linear decay from position_lr_init at 0 to position_lr_final at
    /// total_iters. Throws RangeError outside [0, total_iters].
    double position_lr(std::int64_t iter) const;

    bool is_densify_iter(std::int64_t iter) const;
    bool is_opacity_reset_iter(std::int64_t iter) const;

    friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct LearningRates {
    double scaling = 0.017;
    double rotation = 0.001;
    double opacity = 0.05;
    double sh = 0.0025;
    double rectifier = 1e-4;

    friend bool operator==(const LearningRates&, const LearningRates&) = default;
};

}  // namespace msplat
