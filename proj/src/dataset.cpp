#include "msplat/dataset.hpp"

#include "msplat/errors.hpp"
#include "msplat/image_io.hpp"
#include "msplat/serialization.hpp"

namespace msplat {

std::vector<std::size_t> Dataset::split_indices(const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
        if (manifest.frames[i].split == split) {
            out.push_back(i);
        }
    }
    return out;
}

RiggedMesh load_rig(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    try {
        return rig_from_json(j);
    } catch (const Error& e) {
        rethrow_with_context(e, path.string());
    }
}

void save_rig(const RiggedMesh& mesh, const std::filesystem::path& path) {
    write_text_file(path, rig_to_json(mesh).dump() + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    DatasetManifest m;
    try {
        const int version = j.at("version").get<int>();
        if (version != kManifestVersion) {
            throw VersionError(path.string() + ": manifest version " + std::to_string(version) + ", expected " +
                               std::to_string(kManifestVersion));
        }
        m.rig = j.at("rig").get<std::string>();
        std::size_t index = 0;
        for (const Json& f : j.at("frames")) {
            FrameRecord r;
            const std::string where = path.string() + ": frame " + std::to_string(index);
            try {
                r.image = f.at("image").get<std::string>();
                r.split = f.value("split", std::string("train"));
                r.camera = camera_from_json(f.at("camera"));
                r.pose = pose_from_json(f.at("pose"));
            } catch (const Json::exception& e) {
                throw FormatError(where + ": " + e.what());
            } catch (const Error& e) {
                rethrow_with_context(e, where);
            }
            m.frames.push_back(std::move(r));
            ++index;
        }
    } catch (const Json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    Json frames = Json::array();
    for (const FrameRecord& f : manifest.frames) {
        frames.push_back({{"image", f.image},
                          {"split", f.split},
                          {"camera", camera_to_json(f.camera)},
                          {"pose", pose_to_json(f.pose)}});
    }
    const Json j = {{"version", kManifestVersion}, {"rig", manifest.rig}, {"frames", frames}};
    write_text_file(path, j.dump(1) + "\n");
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    Dataset ds;
    ds.root = manifest_path.parent_path();
    ds.manifest = load_manifest(manifest_path);
    const std::filesystem::path rig_path = ds.root / ds.manifest.rig;
    if (!std::filesystem::exists(rig_path)) {
        throw IoError(manifest_path.string() + ": rig file " + rig_path.string() + " does not exist");
    }
    ds.mesh = load_rig(rig_path);
    for (std::size_t i = 0; i < ds.manifest.frames.size(); ++i) {
        const FrameRecord& f = ds.manifest.frames[i];
        const std::string where = manifest_path.string() + ": frame " + std::to_string(i);
        if (f.pose.joint_rotations.size() != ds.mesh.num_joints()) {
            throw RigError(where + ": pose has " + std::to_string(f.pose.joint_rotations.size()) +
                           " joint rotations, rig has " + std::to_string(ds.mesh.num_joints()) + " joints");
        }
        const std::filesystem::path image_path = ds.root / f.image;
        if (!std::filesystem::exists(image_path)) {
            throw IoError(where + ": image " + image_path.string() + " does not exist");
        }
        Image img = read_png(image_path);
        if (img.width != f.camera.width || img.height != f.camera.height) {
            throw ShapeMismatchError(where + ": image " + image_path.string() + " is " + std::to_string(img.width) +
                                     "x" + std::to_string(img.height) + " but the camera declares " +
                                     std::to_string(f.camera.width) + "x" + std::to_string(f.camera.height));
        }
        ds.images.push_back(std::move(img));
    }
    return ds;
}

}  // namespace msplat
