#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "msplat/gauss_core.hpp"
#include "msplat/image.hpp"

namespace msplat {

/// Pinhole camera. Pixel (x, y) has its centre at (x + 0.5, y + 0.5).
struct Camera {
    double fx = 100.0;
    double fy = 100.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
    Mat4 world_to_camera = Mat4::Identity();

    Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
    Vec3 center() const { return -rotation().transpose() * translation(); }
    /// Throws ConfigError on non-positive focal lengths, empty image or a
    /// non-orthonormal rotation block.
    void validate() const;

    bool operator==(const Camera& o) const;
};

/// Shared constants of the tiled and reference rasterizers.
struct RasterSettings {
    int tile_size = 16;
    double low_pass = 0.3;
    double alpha_clamp = 0.99;
    double min_alpha = 1.0 / 255.0;
    double min_transmittance = 1e-4;
    double near_plane = 0.01;
    double cull_sigma = 3.0;
    double min_det = 1e-12;

    friend bool operator==(const RasterSettings&, const RasterSettings&) = default;
};

struct ProjectedSplat {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();  // includes the low-pass term
    double depth = 0.0;
    Vec3 color = Vec3::Zero();
    double opacity = 0.0;
};

/// Projects a world-space Gaussian. Returns nullopt when it lies in front of
/// the near plane or its cull_sigma ellipse misses the image.
std::optional<ProjectedSplat> project_gaussian(const Vec3& mu, const Covariance3& sigma, const Camera& camera,
                                               const RasterSettings& settings = {});

struct ProjectionGrad {
    Vec3 d_mu = Vec3::Zero();
    Mat3 d_sigma = Mat3::Zero();  // full symmetric gradient
};

/// Backward of project_gaussian for a splat that was not culled.
ProjectionGrad project_gaussian_backward(const Vec3& mu, const Covariance3& sigma, const Camera& camera,
                                         const Vec2& grad_mean2d, const Mat2& grad_cov2d);

struct RenderOutput {
    Image color;                          // H × W × 3
    std::vector<double> alpha;            // H × W
    std::vector<std::uint32_t> contributors;  // H × W
    std::size_t skipped_singular = 0;
    /// Hash of every (pixel, splat, alpha-clamped) contribution; equal hashes
    /// mean the same discrete compositing decisions were taken.
    std::uint64_t signature = 0;
};

/// Forward state retained for the backward pass.
struct RasterCache {
    int width = 0;
    int height = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    RasterSettings settings;
    std::vector<Mat2> conics;
    std::vector<bool> usable;
    std::vector<std::vector<std::uint32_t>> tile_lists;
    std::vector<double> final_transmittance;
    std::vector<std::uint32_t> stop_index;  // per pixel: end of the processed prefix of its tile list
};

/// Indices of `splats` sorted by (depth, index).
std::vector<std::uint32_t> depth_order(std::span<const ProjectedSplat> splats);

/// Screen-space half-extent (pixels) beyond which a splat contributes less
/// than settings.min_alpha.
double splat_radius(const ProjectedSplat& splat, const RasterSettings& settings);

RenderOutput rasterize_forward(std::span<const ProjectedSplat> splats, const Camera& camera,
                               const RasterSettings& settings = {}, RasterCache* cache = nullptr);

/// O(pixels × splats) reference compositor with the same constants.
RenderOutput naive_rasterize(std::span<const ProjectedSplat> splats, const Camera& camera,
                             const RasterSettings& settings = {});

struct SplatGrad2D {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();  // full symmetric gradient
    Vec3 color = Vec3::Zero();
    double opacity = 0.0;
};

std::vector<SplatGrad2D> rasterize_backward(const RasterCache& cache, std::span<const ProjectedSplat> splats,
                                            const Image& grad_color);

}  // namespace msplat
