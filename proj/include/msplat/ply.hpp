#pragma once

#include <filesystem>
#include <vector>

#include "msplat/gauss_core.hpp"
#include "msplat/pipeline.hpp"

namespace msplat {

/// One exported splat in world space. Properties follow the layout common
/// splat viewers read: x y z, nx ny nz, f_dc_*, f_rest_* (channel-major),
/// opacity (logit), scale_* (log), rot_* (w x y z).
struct PlySplat {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    std::vector<double> sh;  // SplatSet layout: coeffs[k * 3 + channel]
    double opacity_logit = 0.0;
    Vec3 log_scale = Vec3::Zero();
    Quaternion rotation;
};

struct PlyCloud {
    int sh_degree = 0;
    std::vector<PlySplat> splats;
};

enum class PlyFormat { BinaryLittleEndian, Ascii };

void write_ply(const PlyCloud& cloud, const std::filesystem::path& path,
               PlyFormat format = PlyFormat::BinaryLittleEndian);
/// Reads files written by write_ply (either format). Throws FormatError on
/// a header it does not understand.
PlyCloud read_ply(const std::filesystem::path& path);

/// Builds the exported cloud from a rendered frame state.
PlyCloud make_ply_cloud(const FrameState& state, const SplatSet& splats);

}  // namespace msplat
