#include "msplat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "msplat/errors.hpp"
#include "msplat/image_io.hpp"
#include "msplat/pipeline.hpp"

namespace msplat {

void SyntheticRigSpec::validate() const {
    if (segment_count < 1 || rings_per_segment < 2 || radial_segments < 3) {
        throw ConfigError("synthetic rig needs segment_count >= 1, rings_per_segment >= 2, radial_segments >= 3");
    }
    if (!(segment_length > 0.0) || !(radius > 0.0) || !(blend_width > 0.0 && blend_width < 0.5)) {
        throw ConfigError("synthetic rig needs positive lengths and blend_width in (0, 0.5)");
    }
    if (num_poses < 1 || num_test_poses < 0 || image_size < 16) {
        throw ConfigError("synthetic rig needs num_poses >= 1, num_test_poses >= 0, image_size >= 16");
    }
    if (num_test_poses > 0 && num_poses < 2) {
        throw ConfigError("held-out poses are interpolated and need at least two training poses");
    }
    if (sh_degree < 1 || sh_degree > kMaxShDegree) {
        throw ConfigError("synthetic sh_degree must be in [1, 3]");
    }
}

namespace {

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

int num_joints(const SyntheticRigSpec& spec) { return spec.segment_count + 1; }
double tube_length(const SyntheticRigSpec& spec) { return num_joints(spec) * spec.segment_length; }

// Procedural albedo in [0.15, 0.85]: diagonal stripes plus rings, varied by
// a per-face random tint.
Vec3 texture_color(double x, double phi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> tint(-0.08, 0.08);
    const double stripe = 0.5 + 0.5 * std::sin(6.0 * x + 3.0 * phi);
    const double ring = 0.5 + 0.5 * std::cos(9.0 * x);
    Vec3 c(0.2 + 0.6 * stripe, 0.2 + 0.6 * ring, 0.2 + 0.6 * (1.0 - stripe) * ring);
    for (int k = 0; k < 3; ++k) {
        c[k] = std::clamp(c[k] + tint(rng), 0.15, 0.85);
    }
    return c;
}

}  // namespace

RiggedMesh make_tube_rig(const SyntheticRigSpec& spec) {
    spec.validate();
    const int joints = num_joints(spec);
    const int rings = joints * spec.rings_per_segment + 1;
    const int s = spec.radial_segments;
    const double length = tube_length(spec);

    RiggedMesh mesh;
    mesh.skin_weights = Eigen::MatrixXd::Zero(rings * s, joints);
    for (int i = 0; i < rings; ++i) {
        const double x = length * i / (rings - 1);
        // Weight of joint k ramps in around x = k * L over ± blend_width * L.
        std::vector<double> w(static_cast<std::size_t>(joints), 0.0);
        double prev = 1.0;
        for (int k = 1; k <= joints; ++k) {
            const double ramp =
                k < joints ? smoothstep((x - (k - spec.blend_width) * spec.segment_length) /
                                        (2.0 * spec.blend_width * spec.segment_length))
                           : 0.0;
            w[static_cast<std::size_t>(k - 1)] = prev - ramp;
            prev = ramp;
        }
        for (int j = 0; j < s; ++j) {
            const double phi = 2.0 * std::numbers::pi * j / s;
            const int v = i * s + j;
            mesh.vertices.emplace_back(x, spec.radius * std::cos(phi), spec.radius * std::sin(phi));
            for (int k = 0; k < joints; ++k) {
                mesh.skin_weights(v, k) = w[static_cast<std::size_t>(k)];
            }
        }
    }
    for (int i = 0; i + 1 < rings; ++i) {
        for (int j = 0; j < s; ++j) {
            const auto a = static_cast<std::uint32_t>(i * s + j);
            const auto b = static_cast<std::uint32_t>((i + 1) * s + j);
            const auto c = static_cast<std::uint32_t>((i + 1) * s + (j + 1) % s);
            const auto d = static_cast<std::uint32_t>(i * s + (j + 1) % s);
            mesh.faces.push_back({a, c, b});
            mesh.faces.push_back({a, d, c});
        }
    }
    for (int k = 0; k < joints; ++k) {
        mesh.joint_parents.push_back(k - 1);
        mesh.joint_rest_positions.emplace_back(k * spec.segment_length, 0.0, 0.0);
    }
    mesh.validate();
    return mesh;
}

Camera make_synthetic_camera(const SyntheticRigSpec& spec) {
    const double length = tube_length(spec);
    const double half_extent = 0.5 * length + spec.radius + 0.35 * length * std::sin(spec.max_bend);
    const double distance = 4.0 * std::max(1.0, 0.5 * length);
    Camera cam;
    cam.width = spec.image_size;
    cam.height = spec.image_size;
    cam.fx = cam.fy = 0.5 * spec.image_size * distance / (1.1 * half_extent);
    cam.cx = cam.cy = 0.5 * spec.image_size;
    // Looks along +z at the tube centre; bending happens in the image plane.
    cam.world_to_camera = Mat4::Identity();
    cam.world_to_camera.topRightCorner<3, 1>() = Vec3(-0.5 * length, 0.0, distance);
    cam.validate();
    return cam;
}

SplatSet make_ground_truth_splats(const SyntheticRigSpec& spec, const RiggedMesh& mesh) {
    spec.validate();
    std::mt19937_64 rng(spec.texture_seed);
    std::uniform_real_distribution<double> offset(-0.08, 0.08);
    std::uniform_real_distribution<double> angle(-0.25, 0.25);
    std::uniform_real_distribution<double> in_plane(0.35, 0.55);
    std::uniform_real_distribution<double> normal_axis(0.1, 0.2);
    std::uniform_real_distribution<double> opacity(0.9, 0.98);
    std::uniform_real_distribution<double> sh1(-0.05, 0.05);

    SplatSet splats;
    splats.sh_degree = spec.sh_degree;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& face = mesh.faces[f];
        const Vec3 centroid = (mesh.vertices[face[0]] + mesh.vertices[face[1]] + mesh.vertices[face[2]]) / 3.0;
        GaussianSplat g;
        g.parent_face = static_cast<std::uint32_t>(f);
        // Local frame axis 1 is the face normal: keep the splat thin along it.
        g.mu_local = Vec3(offset(rng), 0.2 * offset(rng), offset(rng));
        g.rot_local = Quaternion::from_axis_angle(Vec3(0.2 * angle(rng), angle(rng), 0.2 * angle(rng)));
        g.log_scale = Vec3(std::log(in_plane(rng)), std::log(normal_axis(rng)), std::log(in_plane(rng)));
        g.opacity_logit = logit(opacity(rng));
        g.sh_coeffs.assign(splats.sh_stride(), 0.0);
        const Vec3 albedo = texture_color(centroid.x(), std::atan2(centroid.z(), centroid.y()), rng);
        for (int c = 0; c < 3; ++c) {
            g.sh_coeffs[static_cast<std::size_t>(c)] = (albedo[c] - 0.5) / kShY00;
        }
        for (std::size_t k = 3; k < 12; ++k) {
            g.sh_coeffs[k] = sh1(rng);
        }
        splats.push_back(g);
    }
    return splats;
}

std::vector<Pose> make_pose_sweep(const SyntheticRigSpec& spec, std::vector<std::string>* splits) {
    spec.validate();
    const auto joints = static_cast<std::size_t>(num_joints(spec));
    auto make = [&](double bend, double twist) {
        Pose p = Pose::rest(joints);
        for (std::size_t k = 1; k < joints; ++k) {
            p.joint_rotations[k] = Vec3(twist, 0.0, bend) / static_cast<double>(joints - 1);
        }
        return p;
    };
    auto bend_at = [&](double t) {
        return spec.num_poses == 1 ? 0.0 : spec.max_bend * (2.0 * t / (spec.num_poses - 1) - 1.0);
    };
    auto twist_at = [&](double t) { return spec.max_twist * std::sin(2.3 * t); };

    std::vector<Pose> poses;
    std::vector<std::string> tags;
    for (int i = 0; i < spec.num_poses; ++i) {
        poses.push_back(make(bend_at(i), twist_at(i)));
        tags.emplace_back("train");
    }
    // Held-out poses sit halfway between evenly spread neighbouring training poses.
    for (int k = 0; k < spec.num_test_poses; ++k) {
        const double t = (k + 0.5) * (spec.num_poses - 1) / spec.num_test_poses;
        const double lo = std::floor(t);
        poses.push_back(make(bend_at(lo + 0.5), 0.5 * (twist_at(lo) + twist_at(lo + 1.0))));
        tags.emplace_back("test");
    }
    if (splits) {
        *splits = std::move(tags);
    }
    return poses;
}

SyntheticScene make_synthetic_scene(const SyntheticRigSpec& spec) {
    SyntheticScene scene;
    scene.mesh = make_tube_rig(spec);
    scene.ground_truth = make_ground_truth_splats(spec, scene.mesh);
    scene.camera = make_synthetic_camera(spec);
    scene.poses = make_pose_sweep(spec, &scene.splits);
    return scene;
}

std::vector<Vec3> synthetic_posed_vertices(const SyntheticRigSpec& spec, const RiggedMesh& mesh, const Pose& pose) {
    if (spec.bulge == 0.0) {
        return pose_mesh(mesh, pose);
    }
    // Displace the rest shape radially around each joint in proportion to
    // that joint's signed bend, then skin the displaced shape.
    RiggedMesh bulged = mesh;
    const double sigma = spec.blend_width * spec.segment_length;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const Vec3& p = mesh.vertices[v];
        const Vec3 radial(0.0, p.y(), p.z());
        double amount = 0.0;
        for (std::size_t k = 1; k < mesh.num_joints(); ++k) {
            const double dx = (p.x() - mesh.joint_rest_positions[k].x()) / sigma;
            amount += spec.bulge * pose.joint_rotations[k].z() * std::exp(-dx * dx);
        }
        bulged.vertices[v] = p + amount * radial.normalized();
    }
    return pose_mesh(bulged, pose);
}

Image render_ground_truth(const SyntheticRigSpec& spec, const SyntheticScene& scene, const Pose& pose) {
    const std::vector<Vec3> posed = synthetic_posed_vertices(spec, scene.mesh, pose);
    return render_frame(scene.ground_truth, nullptr, posed, scene.mesh.faces, pose, scene.camera).render.color;
}

DatasetManifest synth_generate(const SyntheticRigSpec& spec, const std::filesystem::path& out_dir) {
    const SyntheticScene scene = make_synthetic_scene(spec);
    std::filesystem::create_directories(out_dir / "frames");
    save_rig(scene.mesh, out_dir / "rig.json");
    DatasetManifest manifest;
    manifest.rig = "rig.json";
    for (std::size_t i = 0; i < scene.poses.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frames/%04zu.png", i);
        write_png(render_ground_truth(spec, scene, scene.poses[i]), out_dir / name);
        manifest.frames.push_back({name, scene.splits[i], scene.camera, scene.poses[i]});
    }
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace msplat
