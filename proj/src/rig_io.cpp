#include <fstream>
#include <set>
#include <sstream>

#include "msplat/errors.hpp"
#include "msplat/serialization.hpp"

namespace msplat {

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) {
        throw FormatError(what + ": expected an array of 3 numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + ": expected a JSON object");
    }
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!keys.count(it.key())) {
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
        }
    }
}

Json camera_to_json(const Camera& c) {
    Json m = Json::array();
    for (int r = 0; r < 4; ++r) {
        for (int k = 0; k < 4; ++k) {
            m.push_back(c.world_to_camera(r, k));
        }
    }
    return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
            {"width", c.width}, {"height", c.height}, {"world_to_camera", m}};
}

Camera camera_from_json(const Json& j) {
    try {
        Camera c;
        c.fx = j.at("fx").get<double>();
        c.fy = j.at("fy").get<double>();
        c.cx = j.at("cx").get<double>();
        c.cy = j.at("cy").get<double>();
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        const Json& m = j.at("world_to_camera");
        if (!m.is_array() || m.size() != 16) {
            throw FormatError("camera world_to_camera must hold 16 row-major numbers");
        }
        for (int r = 0; r < 4; ++r) {
            for (int k = 0; k < 4; ++k) {
                c.world_to_camera(r, k) = m[static_cast<std::size_t>(4 * r + k)].get<double>();
            }
        }
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("camera: ") + e.what());
    }
}

Json pose_to_json(const Pose& p) {
    Json rots = Json::array();
    for (const Vec3& r : p.joint_rotations) {
        rots.push_back(vec3_to_json(r));
    }
    return {{"root_translation", vec3_to_json(p.root_translation)}, {"joint_rotations", rots}};
}

Pose pose_from_json(const Json& j) {
    try {
        Pose p;
        p.root_translation = vec3_from_json(j.at("root_translation"), "pose root_translation");
        for (const Json& r : j.at("joint_rotations")) {
            p.joint_rotations.push_back(vec3_from_json(r, "pose joint rotation"));
            if (!p.joint_rotations.back().allFinite()) {
                throw ValidationError("pose joint rotation is not finite");
            }
        }
        return p;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("pose: ") + e.what());
    }
}

Json rig_to_json(const RiggedMesh& mesh) {
    Json verts = Json::array();
    for (const Vec3& v : mesh.vertices) {
        verts.push_back(vec3_to_json(v));
    }
    Json faces = Json::array();
    for (const Face& f : mesh.faces) {
        faces.push_back({f[0], f[1], f[2]});
    }
    Json weights = Json::array();
    for (Eigen::Index i = 0; i < mesh.skin_weights.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < mesh.skin_weights.cols(); ++k) {
            row.push_back(mesh.skin_weights(i, k));
        }
        weights.push_back(row);
    }
    Json joints = Json::array();
    for (const Vec3& p : mesh.joint_rest_positions) {
        joints.push_back(vec3_to_json(p));
    }
    return {{"vertices", verts},
            {"faces", faces},
            {"skin_weights", weights},
            {"joint_parents", mesh.joint_parents},
            {"joint_rest_positions", joints}};
}

RiggedMesh rig_from_json(const Json& j) {
    RiggedMesh mesh;
    try {
        for (const Json& v : j.at("vertices")) {
            mesh.vertices.push_back(vec3_from_json(v, "rig vertex"));
        }
        for (const Json& f : j.at("faces")) {
            if (!f.is_array() || f.size() != 3) {
                throw FormatError("rig face must hold 3 vertex indices");
            }
            mesh.faces.push_back({f[0].get<std::uint32_t>(), f[1].get<std::uint32_t>(), f[2].get<std::uint32_t>()});
        }
        mesh.joint_parents = j.at("joint_parents").get<std::vector<int>>();
        for (const Json& p : j.at("joint_rest_positions")) {
            mesh.joint_rest_positions.push_back(vec3_from_json(p, "rig joint position"));
        }
        const Json& w = j.at("skin_weights");
        if (w.size() != mesh.vertices.size()) {
            throw RigError("skin_weights has " + std::to_string(w.size()) + " rows for " +
                           std::to_string(mesh.vertices.size()) + " vertices");
        }
        mesh.skin_weights.resize(static_cast<Eigen::Index>(mesh.vertices.size()),
                                 static_cast<Eigen::Index>(mesh.joint_parents.size()));
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i].size() != mesh.joint_parents.size()) {
                throw RigError("skin_weights row of vertex " + std::to_string(i) + " has " +
                               std::to_string(w[i].size()) + " entries, expected " +
                               std::to_string(mesh.joint_parents.size()));
            }
            for (std::size_t k = 0; k < w[i].size(); ++k) {
                mesh.skin_weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = w[i][k].get<double>();
            }
        }
    } catch (const Json::exception& e) {
        throw FormatError(std::string("rig: ") + e.what());
    }
    mesh.validate();
    return mesh;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace msplat
