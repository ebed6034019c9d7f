#pragma once

// JSON conversions shared by the rig, manifest, config and checkpoint formats.

#include <filesystem>
#include <initializer_list>
#include <string>

#include "json.hpp"

#include "msplat/gauss_core.hpp"
#include "msplat/mesh_rig.hpp"
#include "msplat/rasterizer.hpp"

namespace msplat {

using Json = nlohmann::json;

Json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j, const std::string& what);

Json camera_to_json(const Camera& c);
Camera camera_from_json(const Json& j);

Json pose_to_json(const Pose& p);
Pose pose_from_json(const Json& j);

Json rig_to_json(const RiggedMesh& mesh);
/// Parses and validates; ValidationError/RigError messages name the element.
RiggedMesh rig_from_json(const Json& j);

/// Throws ConfigError naming `where` if `j` holds a key outside `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace msplat
