#include "msplat/optim.hpp"

#include <cmath>

#include "msplat/errors.hpp"

namespace msplat {

void adam_step(std::span<double> params, std::span<const double> grads, AdamGroup& s, double lr) {
    if (params.size() != grads.size()) {
        throw ShapeMismatchError("adam group '" + s.name + "': " + std::to_string(params.size()) + " params but " +
                                 std::to_string(grads.size()) + " gradients");
    }
    if (s.m.empty() && s.v.empty()) {
        s.m.assign(params.size(), 0.0);
        s.v.assign(params.size(), 0.0);
    }
    if (s.m.size() != params.size() || s.v.size() != params.size()) {
        throw ShapeMismatchError("adam group '" + s.name + "': moment buffers are not congruent with parameters");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("non-finite gradient in group '" + s.name + "' at index " + std::to_string(i) +
                               " (value " + std::to_string(grads[i]) + ", step " + std::to_string(s.step) + ")");
        }
    }
    ++s.step;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
        const double m_hat = s.m[i] / bc1;
        const double v_hat = s.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + s.eps);
    }
}

void remap_moments(AdamGroup& s, std::span<const std::optional<std::size_t>> source, std::size_t width) {
    std::vector<double> m(source.size() * width, 0.0);
    std::vector<double> v(source.size() * width, 0.0);
    const bool have = !s.m.empty();
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (!source[i] || !have) {
            continue;
        }
        for (std::size_t k = 0; k < width; ++k) {
            m[i * width + k] = s.m[*source[i] * width + k];
            v[i * width + k] = s.v[*source[i] * width + k];
        }
    }
    s.m = std::move(m);
    s.v = std::move(v);
}

void reset_moments(AdamGroup& s) {
    std::fill(s.m.begin(), s.m.end(), 0.0);
    std::fill(s.v.begin(), s.v.end(), 0.0);
}

void Schedule::validate() const {
    if (total_iters < 0 || densify_interval <= 0 || opacity_reset_interval <= 0) {
        throw ConfigError("schedule intervals must be positive");
    }
    if (density_control_end > total_iters) {
        throw ConfigError("density_control_end (" + std::to_string(density_control_end) + ") exceeds total_iters (" +
                          std::to_string(total_iters) + ")");
    }
    if (!(position_lr_init > 0.0) || !(position_lr_final > 0.0)) {
        throw ConfigError("position learning rates must be positive");
    }
}

double Schedule::position_lr(std::int64_t iter) const {
    if (iter < 0 || iter > total_iters) {
        throw RangeError("iteration " + std::to_string(iter) + " outside [0, " + std::to_string(total_iters) + "]");
    }
    if (total_iters == 0) {
        return position_lr_init;
    }
    const double t = static_cast<double>(iter) / static_cast<double>(total_iters);
    return std::exp((1.0 - t) * std::log(position_lr_init) + t * std::log(position_lr_final));
}

bool Schedule::is_densify_iter(std::int64_t iter) const {
    return iter >= densify_from && iter < density_control_end && iter % densify_interval == 0;
}

bool Schedule::is_opacity_reset_iter(std::int64_t iter) const {
    return iter >= opacity_reset_from && iter < density_control_end &&
           (iter - opacity_reset_from) % opacity_reset_interval == 0;
}

}  // namespace msplat
