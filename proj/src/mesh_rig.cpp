#include "msplat/mesh_rig.hpp"

#include <cmath>
#include <set>
#include <string>
#include <utility>

#include <Eigen/Geometry>

#include <Eigen/LU>

#include "msplat/errors.hpp"

namespace msplat {

void RiggedMesh::validate() const {
    const std::size_t n = vertices.size();
    const std::size_t joints = joint_parents.size();
    if (joints == 0) {
        throw RigError("rig has no joints");
    }
    if (joint_rest_positions.size() != joints) {
        throw RigError("joint_rest_positions has " + std::to_string(joint_rest_positions.size()) +
                       " entries, expected " + std::to_string(joints));
    }
    for (std::size_t j = 0; j < joints; ++j) {
        const int p = joint_parents[j];
        if (j == 0 ? p != -1 : (p < 0 || static_cast<std::size_t>(p) >= j)) {
            throw RigError("joint " + std::to_string(j) + " has parent " + std::to_string(p) +
                           "; joints must be topologically ordered with root parent -1");
        }
    }
    if (static_cast<std::size_t>(skin_weights.rows()) != n ||
        static_cast<std::size_t>(skin_weights.cols()) != joints) {
        throw RigError("skin_weights must be " + std::to_string(n) + "x" + std::to_string(joints));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = skin_weights.row(static_cast<Eigen::Index>(i));
        if ((row.array() < 0.0).any()) {
            throw ValidationError("vertex " + std::to_string(i) + " has a negative skin weight");
        }
        const double sum = row.sum();
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ValidationError("skin weights of vertex " + std::to_string(i) + " sum to " + std::to_string(sum) +
                                  ", expected 1");
        }
    }
    // A consistently wound manifold uses each directed edge at most once.
    std::set<std::pair<std::uint32_t, std::uint32_t>> directed;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& face = faces[f];
        for (int k = 0; k < 3; ++k) {
            if (face[k] >= n) {
                throw ValidationError("face " + std::to_string(f) + " references vertex " +
                                      std::to_string(face[k]) + " but the mesh has " + std::to_string(n));
            }
        }
        const Vec3 cross = (vertices[face[1]] - vertices[face[0]]).cross(vertices[face[2]] - vertices[face[0]]);
        if (0.5 * cross.norm() < kMinFaceArea) {
            throw DegenerateFaceError("face " + std::to_string(f) + " is degenerate");
        }
        for (int k = 0; k < 3; ++k) {
            if (!directed.emplace(face[k], face[(k + 1) % 3]).second) {
                throw ValidationError("face " + std::to_string(f) + " has inconsistent winding (edge " +
                                      std::to_string(face[k]) + "->" + std::to_string(face[(k + 1) % 3]) +
                                      " is used twice)");
            }
        }
    }
}

bool RiggedMesh::operator==(const RiggedMesh& o) const {
    return vertices == o.vertices && faces == o.faces && skin_weights.rows() == o.skin_weights.rows() &&
           skin_weights.cols() == o.skin_weights.cols() && skin_weights == o.skin_weights &&
           joint_parents == o.joint_parents && joint_rest_positions == o.joint_rest_positions;
}

Pose Pose::rest(std::size_t num_joints) {
    Pose p;
    p.joint_rotations.assign(num_joints, Vec3::Zero());
    return p;
}

std::vector<double> Pose::body_pose_vector(std::size_t width) const {
    std::vector<double> out(width, 0.0);
    std::size_t k = 0;
    for (std::size_t j = 1; j < joint_rotations.size(); ++j) {
        for (int c = 0; c < 3 && k < width; ++c) {
            out[k++] = joint_rotations[j][c];
        }
    }
    return out;
}

Mat3 rodrigues(const Vec3& v) {
    const double angle = v.norm();
    if (angle < 1e-12) {
        return Mat3::Identity();
    }
    const Vec3 k = v / angle;
    Mat3 kx;
    kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    return Mat3::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
}

std::vector<JointTransform> joint_transforms(const RiggedMesh& mesh, const Pose& pose) {
    const std::size_t joints = mesh.num_joints();
    if (pose.joint_rotations.size() != joints) {
        throw RigError("pose has " + std::to_string(pose.joint_rotations.size()) + " joints, rig has " +
                       std::to_string(joints));
    }
    // Joint k acts as x -> j_k + R_k (x - j_k), composed under its parent.
    std::vector<JointTransform> out(joints);
    for (std::size_t k = 0; k < joints; ++k) {
        const Mat3 r = rodrigues(pose.joint_rotations[k]);
        const Vec3& jk = mesh.joint_rest_positions[k];
        JointTransform local{r, jk - r * jk};
        if (k == 0) {
            out[k] = local;
        } else {
            const JointTransform& parent = out[static_cast<std::size_t>(mesh.joint_parents[k])];
            out[k] = {parent.rotation * local.rotation, parent.rotation * local.translation + parent.translation};
        }
    }
    for (auto& t : out) {
        t.translation += pose.root_translation;
    }
    return out;
}

std::vector<Vec3> pose_mesh(const RiggedMesh& mesh, const Pose& pose) {
    const auto transforms = joint_transforms(mesh, pose);
    std::vector<Vec3> out(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        Mat3 r = Mat3::Zero();
        Vec3 t = Vec3::Zero();
        for (std::size_t k = 0; k < transforms.size(); ++k) {
            const double w = mesh.skin_weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            if (w != 0.0) {
                r += w * transforms[k].rotation;
                t += w * transforms[k].translation;
            }
        }
        out[i] = r * mesh.vertices[i] + t;
    }
    return out;
}

TriangleFrame triangle_frame(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 e = b - a;
    const Vec3 f = c - a;
    const Vec3 n = e.cross(f);
    if (0.5 * n.norm() < kMinFaceArea) {
        throw DegenerateFaceError("triangle area below 1e-12");
    }
    const Vec3 e_hat = e.normalized();
    const Vec3 n_hat = n.normalized();
    const Vec3 e_perp = f - f.dot(e_hat) * e_hat;

    TriangleFrame frame;
    frame.rotation.col(0) = e_hat;
    frame.rotation.col(1) = n_hat;
    frame.rotation.col(2) = e_hat.cross(n_hat);
    frame.origin = (a + b + c) / 3.0;
    frame.scale = 0.5 * (e.norm() + e_perp.norm());
    if (frame.rotation.determinant() < 0.0) {
        throw DegenerateFaceError("triangle frame is not right-handed");
    }
    return frame;
}

std::vector<TriangleFrame> face_frames(std::span<const Vec3> vertices, std::span<const Face> faces) {
    std::vector<TriangleFrame> out;
    out.reserve(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        try {
            out.push_back(triangle_frame(vertices[faces[f][0]], vertices[faces[f][1]], vertices[faces[f][2]]));
        } catch (const DegenerateFaceError& e) {
            throw DegenerateFaceError("face " + std::to_string(f) + ": " + e.what());
        }
    }
    return out;
}

namespace {

BoundGaussian bind_impl(const Vec3& mu, const Quaternion& rot, const Vec3& scale, const TriangleFrame& frame) {
    BoundGaussian g;
    g.mu = frame.scale * (frame.rotation * mu) + frame.origin;
    g.rot = quat_multiply(Quaternion::from_matrix(frame.rotation), rot.normalized());
    g.scale = frame.scale * scale;
    return g;
}

}  // namespace

BoundGaussian bind_to_global(const GaussianSplat& splat, const TriangleFrame& frame) {
    return bind_impl(splat.mu_local, splat.rot_local, splat.scale(), frame);
}

BoundGaussian bind_to_global(const SplatSet& splats, std::size_t i, const TriangleFrame& frame) {
    return bind_impl(splats.mu(i), splats.rot(i), splats.scale(i), frame);
}

}  // namespace msplat
