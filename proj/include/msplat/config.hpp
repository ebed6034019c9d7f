#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "msplat/density.hpp"
#include "msplat/losses.hpp"
#include "msplat/optim.hpp"
#include "msplat/rasterizer.hpp"
#include "msplat/rectifier.hpp"

namespace msplat {

struct InitConfig {
    double opacity = 0.1;
    double log_scale = 0.0;  // unit triangle-local scale

    friend bool operator==(const InitConfig&, const InitConfig&) = default;
};

/// Every tunable constant of a training run. Serialized as one JSON file.
struct TrainConfig {
    std::uint64_t seed = 0;
    bool deterministic = true;
    int sh_degree = 3;
    bool use_rectifier = true;
    RectifierConfig rectifier;
    RasterSettings raster;
    LossWeights weights;
    double eps_pos = kDefaultEpsPos;
    double eps_scaling = kDefaultEpsScaling;
    LearningRates lr;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps_splat = 1e-15;
    double adam_eps_rectifier = 1e-8;
    Schedule schedule;
    bool density_control = true;
    DensityControlConfig density;
    double opacity_reset_value = 0.01;
    InitConfig init;
    std::int64_t checkpoint_interval = 0;  // 0: final checkpoint only
    std::int64_t log_interval = 1;

    /// Throws ConfigError describing the first invalid field.
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string config_to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
TrainConfig config_from_json(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
void save_config(const TrainConfig& cfg, const std::filesystem::path& path);

}  // namespace msplat
