#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "msplat/gauss_core.hpp"
#include "msplat/image.hpp"
#include "msplat/mesh_rig.hpp"
#include "msplat/rasterizer.hpp"
#include "msplat/rectifier.hpp"

namespace msplat {

// Full per-frame forward/backward: posed mesh → triangle frames → binding →
// rectification → projection → compositing.

struct FrameState {
    std::vector<TriangleFrame> frames;
    std::vector<BoundGaussian> bound;
    bool rectified_path = false;
    std::vector<double> pose_vec;
    RectifierCache rect_cache;
    std::vector<double> deltas;  // 10 per splat, zero when the rectifier is off
    std::vector<RectifiedGaussian> rectified;
    std::vector<Covariance3> covariances;
    std::vector<ShEval> sh_evals;
    std::vector<int> projected_slot;  // per splat, -1 when culled
    std::vector<std::uint32_t> projected_source;
    std::vector<ProjectedSplat> projected;
    RasterCache raster;
    RenderOutput render;
    std::size_t scale_clamp_events = 0;
};

/// `rectifier` may be null, which removes the rectification stage entirely.
FrameState render_frame(const SplatSet& splats, const RectifierParams* rectifier, std::span<const Vec3> posed_vertices,
                        std::span<const Face> faces, const Pose& pose, const Camera& camera,
                        const RasterSettings& settings = {});

struct ModelGrads {
    std::vector<double> mu_local;
    std::vector<double> rot_local;
    std::vector<double> log_scale;
    std::vector<double> opacity_logit;
    std::vector<double> sh;
    std::vector<double> rectifier;
    /// Per splat |dL/d(mean2d)| in NDC units; negative when the splat was culled.
    std::vector<double> view_grad_norm;

    static ModelGrads zeros_like(const SplatSet& splats, const RectifierParams* rectifier);
};

/// Back-propagates dL/d(image) and an optional dL/d(deltas) (10 per splat)
/// to every model parameter.
ModelGrads backward_frame(const FrameState& state, const SplatSet& splats, const RectifierParams* rectifier,
                          const Camera& camera, const Image& grad_image, std::span<const double> grad_deltas = {});

/// World-space attributes after binding and rectification, per splat.
struct WorldSplat {
    Vec3 mu = Vec3::Zero();
    Quaternion rot;
    Vec3 scale = Vec3::Ones();
};
std::vector<WorldSplat> world_splats(const FrameState& state);

}  // namespace msplat
