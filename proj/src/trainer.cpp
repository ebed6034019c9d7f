#include "msplat/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "msplat/errors.hpp"
#include "msplat/serialization.hpp"

namespace msplat {

namespace {

enum Group : std::size_t { kPosition, kScaling, kRotation, kOpacity, kSh, kRectifier, kGroupCount };
constexpr const char* kGroupNames[kGroupCount] = {"position", "scaling", "rotation", "opacity", "sh", "rectifier"};

std::uint64_t rectifier_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

std::mt19937_64 rng_from_string(const std::string& s) {
    std::mt19937_64 rng;
    std::istringstream is(s);
    is >> rng;
    if (!is) {
        throw FormatError("checkpoint RNG state is unreadable");
    }
    return rng;
}

void check_finite(std::span<const double> v, const char* what, std::int64_t iter) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw NumericError(std::string("non-finite ") + what + " at index " + std::to_string(i) +
                               " in iteration " + std::to_string(iter));
        }
    }
}

}  // namespace

std::vector<TrainFrame> make_train_frames(const Dataset& ds, const std::string& split) {
    std::vector<TrainFrame> out;
    for (const std::size_t i : ds.split_indices(split)) {
        const FrameRecord& f = ds.manifest.frames[i];
        out.push_back({f.camera, f.pose, ds.images[i], pose_mesh(ds.mesh, f.pose)});
    }
    if (out.empty()) {
        throw ValidationError("dataset has no frames in split '" + split + "'");
    }
    return out;
}

std::string log_csv_header() {
    return "iteration,frame,total,rgb,ssim,lpips,pos,scaling,offset,psnr,splats,scale_clamps,event";
}

std::string log_csv_row(const TrainLogRow& r) {
    char buf[512];
    const LossTerms& t = r.loss.raw;
    std::snprintf(buf, sizeof(buf), "%lld,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu,%s",
                  static_cast<long long>(r.iteration), r.frame, r.loss.total, t.rgb, t.ssim,
                  t.lpips ? *t.lpips : 0.0, t.pos, t.scaling, t.offset, r.psnr, r.splats, r.scale_clamps,
                  r.event.c_str());
    return buf;
}

SplatSet init_splats(const RiggedMesh& mesh, const TrainConfig& cfg) {
    SplatSet s;
    s.sh_degree = cfg.sh_degree;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        GaussianSplat g;
        g.parent_face = static_cast<std::uint32_t>(f);
        g.log_scale = Vec3::Constant(cfg.init.log_scale);
        g.opacity_logit = logit(cfg.init.opacity);
        g.sh_coeffs.assign(s.sh_stride(), 0.0);
        s.push_back(g);
    }
    return s;
}

double scene_extent(const RiggedMesh& mesh) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const Vec3& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Vec3 c = 0.5 * (lo + hi);
    double r = 0.0;
    for (const Vec3& v : mesh.vertices) {
        r = std::max(r, (v - c).norm());
    }
    return r;
}

Trainer::Trainer(TrainConfig cfg, RiggedMesh mesh, std::vector<TrainFrame> frames)
    : cfg_(std::move(cfg)), mesh_(std::move(mesh)), frames_(std::move(frames)) {
    cfg_.validate();
    mesh_.validate();
    if (frames_.empty()) {
        throw ValidationError("training needs at least one frame");
    }
    rng_.seed(cfg_.deterministic ? cfg_.seed : std::random_device{}());
    splats_ = init_splats(mesh_, cfg_);
    if (cfg_.use_rectifier) {
        rectifier_ = RectifierParams::initialize(cfg_.rectifier, rectifier_seed(cfg_.seed));
    }
    init_groups();
    density_.reset(splats_.size());
}

Trainer::Trainer(const Checkpoint& ckpt, std::vector<TrainFrame> frames)
    : cfg_(ckpt.config),
      mesh_(ckpt.mesh),
      frames_(std::move(frames)),
      splats_(ckpt.splats),
      rectifier_(ckpt.rectifier),
      groups_(ckpt.optimizer),
      density_(ckpt.density),
      rng_(rng_from_string(ckpt.rng_state)),
      iteration_(ckpt.iteration) {
    cfg_.validate();
    if (frames_.empty()) {
        throw ValidationError("training needs at least one frame");
    }
    if (groups_.size() != kGroupCount || density_.grad_sum.size() != splats_.size()) {
        throw FormatError("checkpoint optimizer or density state does not match its splats");
    }
    const auto frames_rest = face_frames(mesh_.vertices, mesh_.faces);
    for (const auto& f : frames_rest) {
        face_scales_.push_back(f.scale);
    }
    scale_threshold_ = cfg_.density.scale_threshold_fraction * scene_extent(mesh_);
}

void Trainer::init_groups() {
    groups_.clear();
    for (std::size_t g = 0; g < kGroupCount; ++g) {
        AdamGroup a;
        a.name = kGroupNames[g];
        a.beta1 = cfg_.adam_beta1;
        a.beta2 = cfg_.adam_beta2;
        a.eps = g == kRectifier ? cfg_.adam_eps_rectifier : cfg_.adam_eps_splat;
        groups_.push_back(a);
    }
    face_scales_.clear();
    for (const auto& f : face_frames(mesh_.vertices, mesh_.faces)) {
        face_scales_.push_back(f.scale);
    }
    scale_threshold_ = cfg_.density.scale_threshold_fraction * scene_extent(mesh_);
}

void Trainer::step() {
    const std::int64_t iter = iteration_ + 1;
    const double position_lr = cfg_.schedule.position_lr(iter);
    // Draw from a copy so a failed step leaves the generator untouched.
    std::mt19937_64 rng = rng_;
    const std::size_t fi = std::uniform_int_distribution<std::size_t>(0, frames_.size() - 1)(rng);
    const TrainFrame& frame = frames_[fi];
    const RectifierParams* rect = rectifier();

    const FrameState state =
        render_frame(splats_, rect, frame.posed_vertices, mesh_.faces, frame.pose, frame.camera, cfg_.raster);
    const Image& rendered = state.render.color;
    const std::size_t n = splats_.size();

    // Loss terms and their gradients.
    LossTerms terms;
    terms.rgb = l1_loss(rendered, frame.image);
    const SsimWithGrad ssim_eval = ssim_with_grad(rendered, frame.image);
    terms.ssim = 1.0 - ssim_eval.value;
    Image lpips_grad;
    if (perceptual_) {
        terms.lpips = perceptual_->evaluate(rendered, frame.image, &lpips_grad);
    }
    std::vector<double> grad_mu(3 * n, 0.0);
    terms.pos = reg_pos(splats_.mu_local, cfg_.eps_pos, grad_mu);
    std::vector<double> local_scale(3 * n);
    for (std::size_t i = 0; i < 3 * n; ++i) {
        local_scale[i] = std::exp(splats_.log_scale[i]);
    }
    std::vector<double> grad_scale(3 * n, 0.0);
    terms.scaling = reg_scaling(local_scale, cfg_.eps_scaling, grad_scale);
    std::vector<double> grad_deltas(state.deltas.size(), 0.0);
    terms.offset = reg_offset(state.deltas, grad_deltas);
    const LossReport report = total_loss(terms, cfg_.weights);
    if (!std::isfinite(report.total)) {
        throw NumericError("non-finite loss in iteration " + std::to_string(iter) + " (frame " + std::to_string(fi) +
                           ")");
    }

    const LossWeights& w = cfg_.weights;
    Image grad_image = l1_loss_grad(rendered, frame.image);
    const Image& ssim_g = ssim_eval.grad;
    for (std::size_t i = 0; i < grad_image.size(); ++i) {
        grad_image.data[i] = w.rgb * grad_image.data[i] - w.ssim * ssim_g.data[i];
        if (perceptual_) {
            grad_image.data[i] += w.lpips * lpips_grad.data[i];
        }
    }
    for (double& g : grad_deltas) {
        g *= w.offset;
    }
    ModelGrads grads = backward_frame(state, splats_, rect, frame.camera, grad_image, grad_deltas);
    for (std::size_t i = 0; i < 3 * n; ++i) {
        grads.mu_local[i] += w.pos * grad_mu[i];
        grads.log_scale[i] += w.scaling * grad_scale[i] * local_scale[i];
    }
    check_finite(grads.mu_local, "position gradient", iter);
    check_finite(grads.log_scale, "scaling gradient", iter);
    check_finite(grads.rot_local, "rotation gradient", iter);
    check_finite(grads.opacity_logit, "opacity gradient", iter);
    check_finite(grads.sh, "sh gradient", iter);
    check_finite(grads.rectifier, "rectifier gradient", iter);

    adam_step(splats_.mu_local, grads.mu_local, groups_[kPosition], position_lr);
    adam_step(splats_.log_scale, grads.log_scale, groups_[kScaling], cfg_.lr.scaling);
    adam_step(splats_.rot_local, grads.rot_local, groups_[kRotation], cfg_.lr.rotation);
    adam_step(splats_.opacity_logit, grads.opacity_logit, groups_[kOpacity], cfg_.lr.opacity);
    adam_step(splats_.sh, grads.sh, groups_[kSh], cfg_.lr.sh);
    if (rectifier_) {
        adam_step(rectifier_->data, grads.rectifier, groups_[kRectifier], cfg_.lr.rectifier);
    }
    // Keep stored rotations on the unit sphere.
    for (std::size_t i = 0; i < n; ++i) {
        const Quaternion q = splats_.rot(i).normalized();
        splats_.rot_local[4 * i] = q.w;
        splats_.rot_local[4 * i + 1] = q.x;
        splats_.rot_local[4 * i + 2] = q.y;
        splats_.rot_local[4 * i + 3] = q.z;
    }
    density_.accumulate(grads.view_grad_norm);

    TrainLogRow row;
    row.iteration = iter;
    row.frame = fi;
    row.loss = report;
    row.psnr = psnr(rendered, frame.image);
    row.scale_clamps = state.scale_clamp_events;
    rng_ = rng;
    iteration_ = iter;
    density_event(iter, row);
    row.splats = splats_.size();
    log_.push_back(std::move(row));
}

void Trainer::density_event(std::int64_t iter, TrainLogRow& row) {
    if (!cfg_.density_control) {
        return;
    }
    if (cfg_.schedule.is_densify_iter(iter)) {
        const std::size_t before = splats_.size();
        DensifyResult r = densify_and_prune(splats_, density_, cfg_.density, face_scales_, scale_threshold_, rng_);
        const std::size_t widths[] = {3, 3, 4, 1, splats_.sh_stride()};
        for (std::size_t g = 0; g < kRectifier; ++g) {
            remap_moments(groups_[g], r.source, widths[g]);
        }
        splats_ = std::move(r.splats);
        density_.reset(splats_.size());
        events_.push_back({iter, TrainEventKind::Densify, before, splats_.size(), r.cloned, r.split, r.pruned});
        row.event = "densify";
    }
    if (cfg_.schedule.is_opacity_reset_iter(iter)) {
        opacity_reset(splats_, cfg_.opacity_reset_value);
        reset_moments(groups_[kOpacity]);
        events_.push_back({iter, TrainEventKind::OpacityReset, splats_.size(), splats_.size(), 0, 0, 0});
        row.event += row.event.empty() ? "opacity_reset" : "+opacity_reset";
    }
}

void Trainer::run(std::int64_t until, const std::function<void(const Trainer&)>& after_step) {
    if (until > cfg_.schedule.total_iters) {
        throw RangeError("cannot train past total_iters = " + std::to_string(cfg_.schedule.total_iters));
    }
    while (iteration_ < until) {
        step();
        if (after_step) {
            after_step(*this);
        }
    }
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.iteration = iteration_;
    c.config = cfg_;
    c.mesh = mesh_;
    c.splats = splats_;
    c.rectifier = rectifier_;
    c.optimizer = groups_;
    c.density = density_;
    c.rng_state = rng_to_string(rng_);
    return c;
}

Image render_model(const SplatSet& splats, const RectifierParams* rectifier, const RiggedMesh& mesh,
                   const Pose& pose, const Camera& camera, const RasterSettings& settings) {
    const auto posed = pose_mesh(mesh, pose);
    return render_frame(splats, rectifier, posed, mesh.faces, pose, camera, settings).render.color;
}

TrainOutputs train(const TrainConfig& cfg, const Dataset& ds, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    TrainOutputs out{out_dir / "checkpoint.rmav", out_dir / "train_log.csv"};
    Trainer trainer(cfg, ds.mesh, make_train_frames(ds));
    auto write_log = [&] {
        std::string text = log_csv_header() + "\n";
        for (const TrainLogRow& r : trainer.log()) {
            if (r.iteration % cfg.log_interval == 0 || !r.event.empty() || r.iteration == trainer.iteration()) {
                text += log_csv_row(r) + "\n";
            }
        }
        write_text_file(out.log, text);
    };
    save_checkpoint(trainer.checkpoint(), out.checkpoint);
    try {
        trainer.run(cfg.schedule.total_iters, [&](const Trainer& t) {
            if (cfg.checkpoint_interval > 0 && t.iteration() % cfg.checkpoint_interval == 0) {
                save_checkpoint(t.checkpoint(), out.checkpoint);
                write_log();
            }
        });
    } catch (...) {
        write_log();
        throw;
    }
    save_checkpoint(trainer.checkpoint(), out.checkpoint);
    write_log();
    return out;
}

}  // namespace msplat
