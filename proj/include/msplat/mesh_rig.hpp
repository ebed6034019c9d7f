#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "msplat/gauss_core.hpp"

namespace msplat {

/// Number of body-pose channels fed to the rectifier (23 joints × 3).
inline constexpr std::size_t kBodyPoseWidth = 69;

using Face = std::array<std::uint32_t, 3>;

/// Template mesh with a skeleton. Joints are topologically ordered
/// (parent index < child index, root parent = -1).
struct RiggedMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    Eigen::MatrixXd skin_weights;  // vertices × joints
    std::vector<int> joint_parents;
    std::vector<Vec3> joint_rest_positions;

    std::size_t num_joints() const { return joint_parents.size(); }

    /// Throws RigError / ValidationError / DegenerateFaceError naming the
    /// offending vertex, face or joint.
    void validate() const;

    bool operator==(const RiggedMesh& o) const;
};

struct Pose {
    Vec3 root_translation = Vec3::Zero();
    std::vector<Vec3> joint_rotations;  // axis-angle, one per joint, joint 0 = root

    static Pose rest(std::size_t num_joints);

    /// Flattened non-root joint rotations, zero-padded or truncated to `width`.
    std::vector<double> body_pose_vector(std::size_t width = kBodyPoseWidth) const;
};

Mat3 rodrigues(const Vec3& axis_angle);

/// Per-joint rigid transforms (rotation, translation) mapping rest-space
/// points to posed space, root translation included.
struct JointTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
};
std::vector<JointTransform> joint_transforms(const RiggedMesh& mesh, const Pose& pose);

/// Linear blend skinning. Throws RigError on joint-count mismatch.
std::vector<Vec3> pose_mesh(const RiggedMesh& mesh, const Pose& pose);

struct TriangleFrame {
    Mat3 rotation = Mat3::Identity();  // columns: edge, normal, edge × normal
    Vec3 origin = Vec3::Zero();
    double scale = 1.0;
};

inline constexpr double kMinFaceArea = 1e-12;

/// Throws DegenerateFaceError when the triangle area is below kMinFaceArea.
TriangleFrame triangle_frame(const Vec3& a, const Vec3& b, const Vec3& c);

std::vector<TriangleFrame> face_frames(std::span<const Vec3> vertices, std::span<const Face> faces);

/// World-space attributes of a splat carried by a triangle frame.
struct BoundGaussian {
    Vec3 mu = Vec3::Zero();
    Quaternion rot;  // unit
    Vec3 scale = Vec3::Ones();
};

BoundGaussian bind_to_global(const GaussianSplat& splat, const TriangleFrame& frame);

/// Same, reading the splat at index `i` of a set.
BoundGaussian bind_to_global(const SplatSet& splats, std::size_t i, const TriangleFrame& frame);

}  // namespace msplat
