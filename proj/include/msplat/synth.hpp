#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "msplat/dataset.hpp"
#include "msplat/gauss_core.hpp"
#include "msplat/image.hpp"
#include "msplat/mesh_rig.hpp"
#include "msplat/rasterizer.hpp"

namespace msplat {

/// Articulated tube along +x used as a desk-scale test subject. The tube is
/// (segment_count + 1) * segment_length long and driven by a chain of
/// segment_count + 1 joints; joint k sits at x = k * segment_length and owns
/// the section that starts there.
struct SyntheticRigSpec {
    int segment_count = 1;
    double segment_length = 1.0;
    double radius = 0.3;
    int rings_per_segment = 8;  // vertex rings per joint section
    int radial_segments = 12;
    double blend_width = 0.25;  // skinning blend half-width, in segment lengths
    std::uint64_t texture_seed = 7;

    // Pose sequence: bend about z (visible to the camera) and twist about x.
    int num_poses = 20;
    int num_test_poses = 0;  // held-out poses interpolated between training poses
    double max_bend = 0.6;
    double max_twist = 0.3;

    /// Pose-dependent radial bulge near each joint, per radian of bend. The
    /// rig itself cannot express it; 0 keeps the data inside the model class.
    double bulge = 0.0;

    int image_size = 128;
    int sh_degree = 3;

    /// Throws ConfigError on non-positive sizes or counts.
    void validate() const;
};

struct SyntheticScene {
    RiggedMesh mesh;
    SplatSet ground_truth;  // one splat per face
    Camera camera;
    std::vector<Pose> poses;
    std::vector<std::string> splits;  // "train" or "test", per pose
};

RiggedMesh make_tube_rig(const SyntheticRigSpec& spec);
Camera make_synthetic_camera(const SyntheticRigSpec& spec);
SplatSet make_ground_truth_splats(const SyntheticRigSpec& spec, const RiggedMesh& mesh);
std::vector<Pose> make_pose_sweep(const SyntheticRigSpec& spec, std::vector<std::string>* splits = nullptr);
SyntheticScene make_synthetic_scene(const SyntheticRigSpec& spec);

/// Posed vertices including the synthetic bulge (equals pose_mesh when
/// spec.bulge is 0).
std::vector<Vec3> synthetic_posed_vertices(const SyntheticRigSpec& spec, const RiggedMesh& mesh, const Pose& pose);

/// Ground-truth render of one pose through the shared bind/raster pipeline.
Image render_ground_truth(const SyntheticRigSpec& spec, const SyntheticScene& scene, const Pose& pose);

/// Writes rig.json, manifest.json and frames/NNNN.png under `out_dir` and
/// returns the manifest.
DatasetManifest synth_generate(const SyntheticRigSpec& spec, const std::filesystem::path& out_dir);

}  // namespace msplat
