#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msplat/config.hpp"
#include "msplat/density.hpp"
#include "msplat/gauss_core.hpp"
#include "msplat/mesh_rig.hpp"
#include "msplat/optim.hpp"
#include "msplat/rectifier.hpp"

namespace msplat {

// Binary layout (little-endian):
//   "RMAV" | u32 version | u32 section_count
//   section_count × { char tag[4] | u64 offset | u64 size | u32 crc32 }
//   section payloads
// Sections: META (JSON: iteration + config), RIG_ (rig JSON), SPLT, RECT,
// OPTM, DENS, RNG_.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::int64_t iteration = 0;
    TrainConfig config;
    RiggedMesh mesh;
    SplatSet splats;
    std::optional<RectifierParams> rectifier;
    std::vector<AdamGroup> optimizer;
    DensityStats density;
    std::string rng_state;

    bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError (bad magic or layout), VersionError (version differs
/// from `expected_version`) or ChecksumError (CRC mismatch or truncation).
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes, std::uint32_t expected_version = kCheckpointVersion);

/// Writes to `<path>.tmp` and renames over `path`.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace msplat
