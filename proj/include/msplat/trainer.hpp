#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "msplat/checkpoint.hpp"
#include "msplat/config.hpp"
#include "msplat/dataset.hpp"
#include "msplat/losses.hpp"
#include "msplat/pipeline.hpp"

namespace msplat {

/// One training view with its skinned vertices cached.
struct TrainFrame {
    Camera camera;
    Pose pose;
    Image image;
    std::vector<Vec3> posed_vertices;
};

std::vector<TrainFrame> make_train_frames(const Dataset& ds, const std::string& split = "train");

struct TrainLogRow {
    std::int64_t iteration = 0;
    std::size_t frame = 0;
    LossReport loss;
    double psnr = 0.0;
    std::size_t splats = 0;
    std::size_t scale_clamps = 0;
    std::string event;  // "", "densify", "opacity_reset" or both joined by '+'
};

std::string log_csv_header();
std::string log_csv_row(const TrainLogRow& row);

enum class TrainEventKind { Densify, OpacityReset };

struct TrainEvent {
    std::int64_t iteration = 0;
    TrainEventKind kind = TrainEventKind::Densify;
    std::size_t splats_before = 0;
    std::size_t splats_after = 0;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// One splat per face at the local origin with identity rotation.
SplatSet init_splats(const RiggedMesh& mesh, const TrainConfig& cfg);

/// Radius of the rest-pose vertex bounding sphere about the bounding-box centre.
double scene_extent(const RiggedMesh& mesh);

class Trainer {
public:
    Trainer(TrainConfig cfg, RiggedMesh mesh, std::vector<TrainFrame> frames);
    /// Continues a run from a checkpoint; `frames` must be the same views.
    Trainer(const Checkpoint& ckpt, std::vector<TrainFrame> frames);

    /// Runs iteration `iteration() + 1`. Throws NumericError on a non-finite
    /// loss or gradient before any parameter changes, and RangeError once
    /// the schedule is exhausted.
    void step();
    /// Steps until `iteration() == until`, invoking `after_step` after each.
    void run(std::int64_t until, const std::function<void(const Trainer&)>& after_step = {});

    std::int64_t iteration() const { return iteration_; }
    const TrainConfig& config() const { return cfg_; }
    const RiggedMesh& mesh() const { return mesh_; }
    const SplatSet& splats() const { return splats_; }
    const RectifierParams* rectifier() const { return rectifier_ ? &*rectifier_ : nullptr; }
    const std::vector<AdamGroup>& optimizer() const { return groups_; }
    const std::vector<TrainLogRow>& log() const { return log_; }
    const std::vector<TrainEvent>& events() const { return events_; }

    /// Registers an optional perceptual term; it contributes only while set.
    void set_perceptual_loss(const PerceptualLoss* loss) { perceptual_ = loss; }

    Checkpoint checkpoint() const;

private:
    void init_groups();
    void density_event(std::int64_t iter, TrainLogRow& row);

    TrainConfig cfg_;
    RiggedMesh mesh_;
    std::vector<TrainFrame> frames_;
    SplatSet splats_;
    std::optional<RectifierParams> rectifier_;
    std::vector<AdamGroup> groups_;
    DensityStats density_;
    std::mt19937_64 rng_;
    std::int64_t iteration_ = 0;
    std::vector<double> face_scales_;
    double scale_threshold_ = 0.0;
    std::vector<TrainLogRow> log_;
    std::vector<TrainEvent> events_;
    const PerceptualLoss* perceptual_ = nullptr;
};

/// Renders the model at `pose` through the same pipeline training uses.
Image render_model(const SplatSet& splats, const RectifierParams* rectifier, const RiggedMesh& mesh,
                   const Pose& pose, const Camera& camera, const RasterSettings& settings = {});

struct TrainOutputs {
    std::filesystem::path checkpoint;
    std::filesystem::path log;
};

/// Full run on the training split of `ds`: writes `checkpoint.rmav` every
/// cfg.checkpoint_interval iterations and at the end, and `train_log.csv`.
/// A failure leaves the last complete checkpoint in place.
TrainOutputs train(const TrainConfig& cfg, const Dataset& ds, const std::filesystem::path& out_dir);

}  // namespace msplat
