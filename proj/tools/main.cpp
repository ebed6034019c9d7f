// msplat command-line entry point.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error. Runtime errors also
// print one JSON line {"error": <kind>, "message": <text>} to stderr.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "msplat/checkpoint.hpp"
#include "msplat/config.hpp"
#include "msplat/dataset.hpp"
#include "msplat/errors.hpp"
#include "msplat/image_io.hpp"
#include "msplat/losses.hpp"
#include "msplat/ply.hpp"
#include "msplat/serialization.hpp"
#include "msplat/synth.hpp"
#include "msplat/trainer.hpp"

namespace fs = std::filesystem;
using namespace msplat;

namespace {

struct Globals {
    bool deterministic = false;
    std::optional<std::uint64_t> seed;
};

void report_error(const std::string& kind, const std::string& message) {
    std::cerr << Json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

const FrameRecord& frame_at(const DatasetManifest& m, long index) {
    if (index < 0 || static_cast<std::size_t>(index) >= m.frames.size()) {
        throw RangeError("frame index " + std::to_string(index) + " is out of range; the manifest has " +
                         std::to_string(m.frames.size()) + " frames");
    }
    return m.frames[static_cast<std::size_t>(index)];
}

const RectifierParams* rectifier_of(const Checkpoint& c) { return c.rectifier ? &*c.rectifier : nullptr; }

std::vector<Pose> load_pose_list(const fs::path& path) {
    const Json j = read_json_file(path);
    const Json& list = j.is_object() ? j.at("poses") : j;
    std::vector<Pose> poses;
    for (const Json& p : list) {
        poses.push_back(pose_from_json(p));
    }
    return poses;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mesh-bound Gaussian splat avatars: synthesis, training, rendering and evaluation"};
    app.require_subcommand(1);
    Globals g;
    app.add_flag("--deterministic", g.deterministic, "Fixed-seed, reproducible execution");
    app.add_option("--seed", g.seed, "Random seed (overrides the config)");

    // synth
    SyntheticRigSpec spec;
    fs::path synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic articulated-tube dataset");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--segments", spec.segment_count, "Joint segments (joints = segments + 1)");
    synth->add_option("--poses", spec.num_poses, "Training poses");
    synth->add_option("--test-poses", spec.num_test_poses, "Held-out interpolated poses");
    synth->add_option("--size", spec.image_size, "Image width and height");
    synth->add_option("--bulge", spec.bulge, "Pose-dependent bulge per radian of bend");
    synth->add_option("--rings", spec.rings_per_segment, "Vertex rings per segment");
    synth->add_option("--radial", spec.radial_segments, "Vertices per ring");

    // train
    fs::path train_config, train_data, train_out;
    std::optional<std::int64_t> train_iters;
    auto* train_cmd = app.add_subcommand("train", "Train a model from a dataset manifest");
    train_cmd->add_option("--config", train_config, "Training config JSON (defaults when omitted)");
    train_cmd->add_option("--data", train_data, "Dataset manifest")->required();
    train_cmd->add_option("--out", train_out, "Output directory")->required();
    train_cmd->add_option("--iters", train_iters, "Override schedule.total_iters (density events are clipped)");

    // render
    fs::path render_ckpt, render_data, render_out, render_pose, render_camera, render_raw;
    long render_frame = 0;
    auto* render = app.add_subcommand("render", "Render a checkpoint at one pose");
    render->add_option("--checkpoint", render_ckpt, "Checkpoint file")->required();
    render->add_option("--data", render_data, "Dataset manifest supplying camera and pose");
    render->add_option("--frame", render_frame, "Frame index into the manifest");
    render->add_option("--pose", render_pose, "Pose JSON (overrides the manifest pose)");
    render->add_option("--camera", render_camera, "Camera JSON (overrides the manifest camera)");
    render->add_option("--out", render_out, "Output PNG")->required();
    render->add_option("--raw", render_raw, "Also write the unquantized float image here");

    // animate
    fs::path anim_ckpt, anim_poses, anim_camera, anim_data, anim_out;
    auto* animate = app.add_subcommand("animate", "Render a checkpoint over a pose sequence");
    animate->add_option("--checkpoint", anim_ckpt, "Checkpoint file")->required();
    animate->add_option("--poses", anim_poses, "JSON list of poses (or {\"poses\": [...]})")->required();
    animate->add_option("--camera", anim_camera, "Camera JSON");
    animate->add_option("--data", anim_data, "Manifest whose first camera is used when --camera is absent");
    animate->add_option("--out", anim_out, "Output directory for NNNN.png frames")->required();

    // eval
    fs::path eval_ckpt, eval_data, eval_out;
    std::string eval_split = "test";
    auto* eval = app.add_subcommand("eval", "Per-frame and mean PSNR/SSIM on a manifest split");
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    eval->add_option("--data", eval_data, "Dataset manifest")->required();
    eval->add_option("--split", eval_split, "Split tag to evaluate");
    eval->add_option("--out", eval_out, "CSV output (stdout when omitted)");

    // export-ply
    fs::path ply_ckpt, ply_data, ply_pose, ply_out;
    long ply_frame = -1;
    bool ply_ascii = false;
    auto* ply = app.add_subcommand("export-ply", "Export world-space splats at a pose as PLY");
    ply->add_option("--checkpoint", ply_ckpt, "Checkpoint file")->required();
    ply->add_option("--data", ply_data, "Dataset manifest (with --frame)");
    ply->add_option("--frame", ply_frame, "Frame index whose pose is used");
    ply->add_option("--pose", ply_pose, "Pose JSON (rest pose when neither --pose nor --frame)");
    ply->add_flag("--ascii", ply_ascii, "Write ASCII instead of binary little-endian");
    ply->add_option("--out", ply_out, "Output PLY")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        report_error("usage", e.what());
        return 2;
    }

    try {
        if (synth->parsed()) {
            if (g.seed) {
                spec.texture_seed = *g.seed;
            }
            const DatasetManifest m = synth_generate(spec, synth_out);
            std::cout << "wrote " << m.frames.size() << " frames to " << synth_out.string() << "\n";
        } else if (train_cmd->parsed()) {
            TrainConfig cfg = train_config.empty() ? TrainConfig{} : load_config(train_config);
            if (g.seed) {
                cfg.seed = *g.seed;
            }
            if (g.deterministic) {
                cfg.deterministic = true;
            }
            if (train_iters) {
                cfg.schedule.total_iters = *train_iters;
                cfg.schedule.density_control_end = std::min(cfg.schedule.density_control_end, *train_iters);
            }
            cfg.validate();
            const Dataset ds = load_dataset(train_data);
            const TrainOutputs out = train(cfg, ds, train_out);
            save_config(cfg, train_out / "config.json");
            std::cout << "checkpoint " << out.checkpoint.string() << "\nlog " << out.log.string() << "\n";
        } else if (render->parsed()) {
            const Checkpoint ck = load_checkpoint(render_ckpt);
            std::optional<Camera> cam;
            std::optional<Pose> pose;
            if (!render_data.empty()) {
                const FrameRecord& f = frame_at(load_manifest(render_data), render_frame);
                cam = f.camera;
                pose = f.pose;
            }
            if (!render_camera.empty()) {
                cam = camera_from_json(read_json_file(render_camera));
            }
            if (!render_pose.empty()) {
                pose = pose_from_json(read_json_file(render_pose));
            }
            if (!cam || !pose) {
                throw ConfigError("render needs a camera and a pose (--data/--frame or --camera/--pose)");
            }
            const Image img = render_model(ck.splats, rectifier_of(ck), ck.mesh, *pose, *cam, ck.config.raster);
            write_png(img, render_out);
            if (!render_raw.empty()) {
                write_raw(img, render_raw);
            }
        } else if (animate->parsed()) {
            const Checkpoint ck = load_checkpoint(anim_ckpt);
            Camera cam;
            if (!anim_camera.empty()) {
                cam = camera_from_json(read_json_file(anim_camera));
            } else if (!anim_data.empty()) {
                cam = frame_at(load_manifest(anim_data), 0).camera;
            } else {
                throw ConfigError("animate needs --camera or --data");
            }
            const auto poses = load_pose_list(anim_poses);
            for (std::size_t i = 0; i < poses.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "%04zu.png", i);
                write_png(render_model(ck.splats, rectifier_of(ck), ck.mesh, poses[i], cam, ck.config.raster),
                          anim_out / name);
            }
            std::cout << "wrote " << poses.size() << " frames to " << anim_out.string() << "\n";
        } else if (eval->parsed()) {
            const Checkpoint ck = load_checkpoint(eval_ckpt);
            const Dataset ds = load_dataset(eval_data);
            const auto indices = ds.split_indices(eval_split);
            if (indices.empty()) {
                throw ValidationError("manifest has no frames in split '" + eval_split + "'");
            }
            std::string csv = "frame,image,psnr,ssim\n";
            double sum_psnr = 0.0, sum_ssim = 0.0;
            for (const std::size_t i : indices) {
                const FrameRecord& f = ds.manifest.frames[i];
                const Image img = render_model(ck.splats, rectifier_of(ck), ck.mesh, f.pose, f.camera, ck.config.raster);
                const double p = psnr(img, ds.images[i]);
                const double s = ssim(img, ds.images[i]);
                sum_psnr += p;
                sum_ssim += s;
                char line[256];
                std::snprintf(line, sizeof(line), "%zu,%s,%.4f,%.5f\n", i, f.image.c_str(), p, s);
                csv += line;
            }
            char mean[128];
            std::snprintf(mean, sizeof(mean), "mean,,%.4f,%.5f\n", sum_psnr / indices.size(), sum_ssim / indices.size());
            csv += mean;
            if (eval_out.empty()) {
                std::cout << csv;
            } else {
                write_text_file(eval_out, csv);
            }
        } else if (ply->parsed()) {
            const Checkpoint ck = load_checkpoint(ply_ckpt);
            Pose pose = Pose::rest(ck.mesh.num_joints());
            if (!ply_pose.empty()) {
                pose = pose_from_json(read_json_file(ply_pose));
            } else if (ply_frame >= 0) {
                if (ply_data.empty()) {
                    throw ConfigError("--frame needs --data");
                }
                pose = frame_at(load_manifest(ply_data), ply_frame).pose;
            }
            const auto posed = pose_mesh(ck.mesh, pose);
            // Any camera works here; only world-space attributes are exported.
            Camera cam;
            cam.width = cam.height = 1;
            const FrameState state = msplat::render_frame(ck.splats, rectifier_of(ck), posed, ck.mesh.faces, pose, cam,
                                                          ck.config.raster);
            write_ply(make_ply_cloud(state, ck.splats), ply_out,
                      ply_ascii ? PlyFormat::Ascii : PlyFormat::BinaryLittleEndian);
        }
    } catch (const Error& e) {
        report_error(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        report_error("runtime", e.what());
        return 1;
    }
    return 0;
}
