#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "msplat/image.hpp"
#include "msplat/mesh_rig.hpp"
#include "msplat/rasterizer.hpp"

namespace msplat {

inline constexpr int kManifestVersion = 1;

struct FrameRecord {
    std::string image;  // path relative to the manifest directory
    std::string split = "train";
    Camera camera;
    Pose pose;
};

/// Manifest JSON:
///   {"version": 1, "rig": "rig.json",
///    "frames": [{"image": "...", "split": "train", "camera": {...}, "pose": {...}}]}
struct DatasetManifest {
    std::string rig = "rig.json";
    std::vector<FrameRecord> frames;
};

struct Dataset {
    std::filesystem::path root;
    DatasetManifest manifest;
    RiggedMesh mesh;
    std::vector<Image> images;  // one per manifest frame, values in [0, 1]

    std::size_t size() const { return manifest.frames.size(); }
    /// Frame indices whose split tag equals `split`.
    std::vector<std::size_t> split_indices(const std::string& split) const;
};

RiggedMesh load_rig(const std::filesystem::path& path);
void save_rig(const RiggedMesh& mesh, const std::filesystem::path& path);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Loads and validates a manifest, its rig and every image. Errors name the
/// offending file and frame: IoError (missing file), ShapeMismatchError
/// (image vs camera size), RigError (pose joint count), ValidationError /
/// RigError from rig validation.
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace msplat
