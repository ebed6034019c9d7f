#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "msplat/gauss_core.hpp"
#include "msplat/image.hpp"
#include "msplat/rectifier.hpp"

namespace msplat {

// Image losses. All throw ShapeMismatchError on differing shapes.

/// Mean absolute per-channel difference.
double l1_loss(const Image& rendered, const Image& target);
/// dL1/d(rendered); sign(0) = 0.
Image l1_loss_grad(const Image& rendered, const Image& target);

double mse(const Image& rendered, const Image& target);

inline constexpr double kPsnrCap = 100.0;
/// 10·log10(1 / MSE) for peak 1.0, capped at 100 dB when MSE < 1e-10.
double psnr(const Image& rendered, const Image& target);

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// Mean SSIM over channels and valid (fully covered) window positions.
/// Throws ShapeMismatchError when the image is smaller than the window.
double ssim(const Image& rendered, const Image& target, const SsimConfig& cfg = {});
/// dSSIM/d(rendered).
Image ssim_grad(const Image& rendered, const Image& target, const SsimConfig& cfg = {});

struct SsimWithGrad {
    double value = 0.0;
    Image grad;
};
/// Value and gradient in one pass over the filtered statistics.
SsimWithGrad ssim_with_grad(const Image& rendered, const Image& target, const SsimConfig& cfg = {});
inline double ssim_loss(const Image& a, const Image& b, const SsimConfig& cfg = {}) { return 1.0 - ssim(a, b, cfg); }

// ---------------------------------------------------------------------------
// Per-splat regularizers; each is a mean over splats of a per-splat L2 norm.
// Gradients are written per splat into spans with the same layout.

inline constexpr double kDefaultEpsPos = 1.0;
inline constexpr double kDefaultEpsScaling = 0.6;

/// mean ‖max(|μ| − ε, 0)‖₂ over splats; `mu` holds 3 values per splat.
double reg_pos(std::span<const double> mu, double eps, std::span<double> grad = {});
/// mean ‖max(s − ε, 0)‖₂ over splats; `scale` holds activated scales.
double reg_scaling(std::span<const double> scale, double eps, std::span<double> grad = {});
/// mean ‖(δμ, δr, δs)‖₂ over splats; `deltas` holds 10 values per splat.
double reg_offset(std::span<const double> deltas, std::span<double> grad = {});

// ---------------------------------------------------------------------------

struct LossWeights {
    double rgb = 1.5;
    double ssim = 0.2;
    double lpips = 0.0;
    double pos = 0.01;
    double scaling = 1.0;
    double offset = 1.0;

    /// Throws ConfigError on a negative weight.
    void validate() const;

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Optional perceptual term. Implementations return the loss and write
/// dL/d(rendered) into `grad` when it is non-null.
class PerceptualLoss {
public:
    virtual ~PerceptualLoss() = default;
    virtual double evaluate(const Image& rendered, const Image& target, Image* grad) const = 0;
};

struct LossTerms {
    double rgb = 0.0;
    double ssim = 0.0;  // 1 - SSIM
    std::optional<double> lpips;  // empty when no perceptual plug-in is registered
    double pos = 0.0;
    double scaling = 0.0;
    double offset = 0.0;
};

struct LossReport {
    LossTerms raw;
    LossTerms weighted;
    double total = 0.0;
};

LossReport total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace msplat
