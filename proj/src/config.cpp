#include "msplat/config.hpp"

#include "msplat/errors.hpp"
#include "msplat/serialization.hpp"

namespace msplat {

void TrainConfig::validate() const {
    if (sh_degree < 0 || sh_degree > kMaxShDegree) {
        throw ConfigError("sh_degree must be in [0, 3]");
    }
    rectifier.validate();
    weights.validate();
    schedule.validate();
    density.validate();
    if (!(eps_pos >= 0.0) || !(eps_scaling >= 0.0)) {
        throw ConfigError("regularizer thresholds must be non-negative");
    }
    const double lrs[] = {lr.scaling, lr.rotation, lr.opacity, lr.sh, lr.rectifier};
    for (const double v : lrs) {
        if (!(v >= 0.0)) {
            throw ConfigError("learning rates must be non-negative");
        }
    }
    if (!(opacity_reset_value > 0.0 && opacity_reset_value < 1.0)) {
        throw ConfigError("opacity_reset_value must lie in (0, 1)");
    }
    if (!(init.opacity > 0.0 && init.opacity < 1.0)) {
        throw ConfigError("init.opacity must lie in (0, 1)");
    }
    if (raster.tile_size <= 0) {
        throw ConfigError("raster.tile_size must be positive");
    }
    if (checkpoint_interval < 0 || log_interval <= 0) {
        throw ConfigError("checkpoint_interval must be >= 0 and log_interval > 0");
    }
}

namespace {

template <class T>
void read(const Json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const Json::exception& e) {
            throw ConfigError(std::string("config key '") + key + "': " + e.what());
        }
    }
}

Json to_json(const TrainConfig& c) {
    return {
        {"seed", c.seed},
        {"deterministic", c.deterministic},
        {"sh_degree", c.sh_degree},
        {"use_rectifier", c.use_rectifier},
        {"rectifier",
         {{"num_bands", c.rectifier.encoder.num_bands},
          {"include_identity", c.rectifier.encoder.include_identity},
          {"pose_dim", c.rectifier.pose_dim},
          {"hidden", c.rectifier.hidden},
          {"skip_layer", c.rectifier.skip_layer}}},
        {"raster",
         {{"tile_size", c.raster.tile_size},
          {"low_pass", c.raster.low_pass},
          {"alpha_clamp", c.raster.alpha_clamp},
          {"min_alpha", c.raster.min_alpha},
          {"min_transmittance", c.raster.min_transmittance},
          {"near_plane", c.raster.near_plane},
          {"cull_sigma", c.raster.cull_sigma},
          {"min_det", c.raster.min_det}}},
        {"loss_weights",
         {{"rgb", c.weights.rgb},
          {"ssim", c.weights.ssim},
          {"lpips", c.weights.lpips},
          {"pos", c.weights.pos},
          {"scaling", c.weights.scaling},
          {"offset", c.weights.offset}}},
        {"eps_pos", c.eps_pos},
        {"eps_scaling", c.eps_scaling},
        {"learning_rates",
         {{"scaling", c.lr.scaling},
          {"rotation", c.lr.rotation},
          {"opacity", c.lr.opacity},
          {"sh", c.lr.sh},
          {"rectifier", c.lr.rectifier}}},
        {"adam_beta1", c.adam_beta1},
        {"adam_beta2", c.adam_beta2},
        {"adam_eps_splat", c.adam_eps_splat},
        {"adam_eps_rectifier", c.adam_eps_rectifier},
        {"schedule",
         {{"total_iters", c.schedule.total_iters},
          {"densify_interval", c.schedule.densify_interval},
          {"densify_from", c.schedule.densify_from},
          {"opacity_reset_interval", c.schedule.opacity_reset_interval},
          {"opacity_reset_from", c.schedule.opacity_reset_from},
          {"density_control_end", c.schedule.density_control_end},
          {"position_lr_init", c.schedule.position_lr_init},
          {"position_lr_final", c.schedule.position_lr_final}}},
        {"density_control", c.density_control},
        {"density",
         {{"grad_threshold", c.density.grad_threshold},
          {"scale_threshold_fraction", c.density.scale_threshold_fraction},
          {"prune_opacity", c.density.prune_opacity},
          {"split_divisor", c.density.split_divisor},
          {"max_splats", c.density.max_splats}}},
        {"opacity_reset_value", c.opacity_reset_value},
        {"init", {{"opacity", c.init.opacity}, {"log_scale", c.init.log_scale}}},
        {"checkpoint_interval", c.checkpoint_interval},
        {"log_interval", c.log_interval},
    };
}

TrainConfig from_json(const Json& j) {
    reject_unknown_keys(j,
                        {"seed", "deterministic", "sh_degree", "use_rectifier", "rectifier", "raster", "loss_weights",
                         "eps_pos", "eps_scaling", "learning_rates", "adam_beta1", "adam_beta2", "adam_eps_splat",
                         "adam_eps_rectifier", "schedule", "density_control", "density", "opacity_reset_value",
                         "init", "checkpoint_interval", "log_interval"},
                        "config");
    TrainConfig c;
    read(j, "seed", c.seed);
    read(j, "deterministic", c.deterministic);
    read(j, "sh_degree", c.sh_degree);
    read(j, "use_rectifier", c.use_rectifier);
    if (j.contains("rectifier")) {
        const Json& r = j["rectifier"];
        reject_unknown_keys(r, {"num_bands", "include_identity", "pose_dim", "hidden", "skip_layer"}, "rectifier");
        read(r, "num_bands", c.rectifier.encoder.num_bands);
        read(r, "include_identity", c.rectifier.encoder.include_identity);
        read(r, "pose_dim", c.rectifier.pose_dim);
        read(r, "hidden", c.rectifier.hidden);
        read(r, "skip_layer", c.rectifier.skip_layer);
    }
    if (j.contains("raster")) {
        const Json& r = j["raster"];
        reject_unknown_keys(r,
                            {"tile_size", "low_pass", "alpha_clamp", "min_alpha", "min_transmittance", "near_plane",
                             "cull_sigma", "min_det"},
                            "raster");
        read(r, "tile_size", c.raster.tile_size);
        read(r, "low_pass", c.raster.low_pass);
        read(r, "alpha_clamp", c.raster.alpha_clamp);
        read(r, "min_alpha", c.raster.min_alpha);
        read(r, "min_transmittance", c.raster.min_transmittance);
        read(r, "near_plane", c.raster.near_plane);
        read(r, "cull_sigma", c.raster.cull_sigma);
        read(r, "min_det", c.raster.min_det);
    }
    if (j.contains("loss_weights")) {
        const Json& w = j["loss_weights"];
        reject_unknown_keys(w, {"rgb", "ssim", "lpips", "pos", "scaling", "offset"}, "loss_weights");
        read(w, "rgb", c.weights.rgb);
        read(w, "ssim", c.weights.ssim);
        read(w, "lpips", c.weights.lpips);
        read(w, "pos", c.weights.pos);
        read(w, "scaling", c.weights.scaling);
        read(w, "offset", c.weights.offset);
    }
    read(j, "eps_pos", c.eps_pos);
    read(j, "eps_scaling", c.eps_scaling);
    if (j.contains("learning_rates")) {
        const Json& l = j["learning_rates"];
        reject_unknown_keys(l, {"scaling", "rotation", "opacity", "sh", "rectifier"}, "learning_rates");
        read(l, "scaling", c.lr.scaling);
        read(l, "rotation", c.lr.rotation);
        read(l, "opacity", c.lr.opacity);
        read(l, "sh", c.lr.sh);
        read(l, "rectifier", c.lr.rectifier);
    }
    read(j, "adam_beta1", c.adam_beta1);
    read(j, "adam_beta2", c.adam_beta2);
    read(j, "adam_eps_splat", c.adam_eps_splat);
    read(j, "adam_eps_rectifier", c.adam_eps_rectifier);
    if (j.contains("schedule")) {
        const Json& s = j["schedule"];
        reject_unknown_keys(s,
                            {"total_iters", "densify_interval", "densify_from", "opacity_reset_interval",
                             "opacity_reset_from", "density_control_end", "position_lr_init", "position_lr_final"},
                            "schedule");
        read(s, "total_iters", c.schedule.total_iters);
        read(s, "densify_interval", c.schedule.densify_interval);
        read(s, "densify_from", c.schedule.densify_from);
        read(s, "opacity_reset_interval", c.schedule.opacity_reset_interval);
        read(s, "opacity_reset_from", c.schedule.opacity_reset_from);
        read(s, "density_control_end", c.schedule.density_control_end);
        read(s, "position_lr_init", c.schedule.position_lr_init);
        read(s, "position_lr_final", c.schedule.position_lr_final);
    }
    read(j, "density_control", c.density_control);
    if (j.contains("density")) {
        const Json& d = j["density"];
        reject_unknown_keys(d, {"grad_threshold", "scale_threshold_fraction", "prune_opacity", "split_divisor", "max_splats"},
                            "density");
        read(d, "grad_threshold", c.density.grad_threshold);
        read(d, "scale_threshold_fraction", c.density.scale_threshold_fraction);
        read(d, "prune_opacity", c.density.prune_opacity);
        read(d, "split_divisor", c.density.split_divisor);
        read(d, "max_splats", c.density.max_splats);
    }
    read(j, "opacity_reset_value", c.opacity_reset_value);
    if (j.contains("init")) {
        const Json& i = j["init"];
        reject_unknown_keys(i, {"opacity", "log_scale"}, "init");
        read(i, "opacity", c.init.opacity);
        read(i, "log_scale", c.init.log_scale);
    }
    read(j, "checkpoint_interval", c.checkpoint_interval);
    read(j, "log_interval", c.log_interval);
    c.validate();
    return c;
}

}  // namespace

std::string config_to_json(const TrainConfig& cfg) { return to_json(cfg).dump(2); }

TrainConfig config_from_json(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

TrainConfig load_config(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

void save_config(const TrainConfig& cfg, const std::filesystem::path& path) {
    write_text_file(path, config_to_json(cfg) + "\n");
}

}  // namespace msplat
