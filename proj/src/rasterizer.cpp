#include "msplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/LU>

#include "msplat/errors.hpp"

namespace msplat {

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw ConfigError("camera focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw ConfigError("camera image size must be positive");
    }
    const Mat3 r = rotation();
    if (!(r.transpose() * r).isApprox(Mat3::Identity(), 1e-6) || r.determinant() < 0.0) {
        throw ConfigError("camera rotation block is not a proper rotation");
    }
}

bool Camera::operator==(const Camera& o) const {
    return fx == o.fx && fy == o.fy && cx == o.cx && cy == o.cy && width == o.width && height == o.height &&
           world_to_camera == o.world_to_camera;
}

namespace {

struct CameraJacobian {
    Vec3 t;
    Eigen::Matrix<double, 2, 3> j;
};

CameraJacobian camera_jacobian(const Vec3& mu, const Camera& camera) {
    CameraJacobian out;
    out.t = camera.rotation() * mu + camera.translation();
    const double tz = out.t.z();
    const double tz2 = tz * tz;
    out.j << camera.fx / tz, 0.0, -camera.fx * out.t.x() / tz2,
        0.0, camera.fy / tz, -camera.fy * out.t.y() / tz2;
    return out;
}

double max_eigenvalue(const Mat2& m) {
    const double mid = 0.5 * (m(0, 0) + m(1, 1));
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    return mid + std::sqrt(std::max(0.0, mid * mid - det));
}

}  // namespace

std::optional<ProjectedSplat> project_gaussian(const Vec3& mu, const Covariance3& sigma, const Camera& camera,
                                               const RasterSettings& settings) {
    const CameraJacobian cj = camera_jacobian(mu, camera);
    if (!(cj.t.z() > settings.near_plane)) {
        return std::nullopt;
    }
    const Mat3 w = camera.rotation();
    const Mat3 sigma_cam = w * sigma.matrix() * w.transpose();
    ProjectedSplat out;
    out.depth = cj.t.z();
    out.mean2d = {camera.fx * cj.t.x() / cj.t.z() + camera.cx, camera.fy * cj.t.y() / cj.t.z() + camera.cy};
    out.cov2d = cj.j * sigma_cam * cj.j.transpose();
    out.cov2d(0, 0) += settings.low_pass;
    out.cov2d(1, 1) += settings.low_pass;

    const double r = settings.cull_sigma * std::sqrt(max_eigenvalue(out.cov2d));
    if (out.mean2d.x() + r < 0.0 || out.mean2d.x() - r > camera.width || out.mean2d.y() + r < 0.0 ||
        out.mean2d.y() - r > camera.height) {
        return std::nullopt;
    }
    return out;
}

ProjectionGrad project_gaussian_backward(const Vec3& mu, const Covariance3& sigma, const Camera& camera,
                                         const Vec2& grad_mean2d, const Mat2& grad_cov2d) {
    const CameraJacobian cj = camera_jacobian(mu, camera);
    const Mat3 w = camera.rotation();
    const Mat3 sigma_cam = w * sigma.matrix() * w.transpose();
    const double tx = cj.t.x(), ty = cj.t.y(), tz = cj.t.z();
    const double fx = camera.fx, fy = camera.fy;

    ProjectionGrad g;
    g.d_sigma = w.transpose() * (cj.j.transpose() * grad_cov2d * cj.j) * w;

    const Eigen::Matrix<double, 2, 3> d_j = (grad_cov2d + grad_cov2d.transpose()) * cj.j * sigma_cam;
    const double tz2 = tz * tz, tz3 = tz2 * tz;
    Vec3 d_t;
    d_t.x() = -d_j(0, 2) * fx / tz2 + grad_mean2d.x() * fx / tz;
    d_t.y() = -d_j(1, 2) * fy / tz2 + grad_mean2d.y() * fy / tz;
    d_t.z() = -d_j(0, 0) * fx / tz2 + d_j(0, 2) * 2.0 * fx * tx / tz3 - d_j(1, 1) * fy / tz2 +
              d_j(1, 2) * 2.0 * fy * ty / tz3 - grad_mean2d.x() * fx * tx / tz2 - grad_mean2d.y() * fy * ty / tz2;
    g.d_mu = w.transpose() * d_t;
    return g;
}

// ---------------------------------------------------------------------------

std::vector<std::uint32_t> depth_order(std::span<const ProjectedSplat> splats) {
    std::vector<std::uint32_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (splats[a].depth != splats[b].depth) {
            return splats[a].depth < splats[b].depth;
        }
        return a < b;
    });
    return order;
}

double splat_radius(const ProjectedSplat& splat, const RasterSettings& settings) {
    const double sd = std::sqrt(max_eigenvalue(splat.cov2d));
    double k = settings.cull_sigma;
    if (splat.opacity > settings.min_alpha) {
        k = std::max(k, std::sqrt(2.0 * std::log(splat.opacity / settings.min_alpha)));
    }
    return k * sd + 1.0;
}

namespace {

struct Prepared {
    std::vector<Mat2> conics;
    std::vector<bool> usable;
    std::size_t skipped = 0;
};

Prepared prepare(std::span<const ProjectedSplat> splats, const RasterSettings& settings) {
    Prepared p;
    p.conics.resize(splats.size(), Mat2::Zero());
    p.usable.resize(splats.size(), false);
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const Mat2& c = splats[i].cov2d;
        const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
        if (!(det >= settings.min_det) || !std::isfinite(det)) {
            ++p.skipped;
            continue;
        }
        p.conics[i] << c(1, 1) / det, -c(0, 1) / det, -c(1, 0) / det, c(0, 0) / det;
        p.usable[i] = true;
    }
    return p;
}

struct Contribution {
    double alpha = 0.0;
    double gauss = 0.0;
    bool clamped = false;
};

// Shared by both compositors so their arithmetic is identical.
inline bool evaluate(const ProjectedSplat& s, const Mat2& conic, double px, double py, const RasterSettings& settings,
                     Contribution& c) {
    const double dx = px - s.mean2d.x();
    const double dy = py - s.mean2d.y();
    const double power = -0.5 * (conic(0, 0) * dx * dx + conic(1, 1) * dy * dy) - conic(0, 1) * dx * dy;
    if (power > 0.0) {
        return false;
    }
    c.gauss = std::exp(power);
    c.alpha = s.opacity * c.gauss;
    c.clamped = c.alpha > settings.alpha_clamp;
    if (c.clamped) {
        c.alpha = settings.alpha_clamp;
    }
    return c.alpha >= settings.min_alpha;
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

struct PixelResult {
    Vec3 color = Vec3::Zero();
    double transmittance = 1.0;
    std::uint32_t stop = 0;
    std::uint32_t count = 0;
    std::uint64_t hash = 0;
};

template <class Indices>
PixelResult composite(const Indices& list, std::span<const ProjectedSplat> splats, const Prepared& prep, double px,
                      double py, std::uint64_t pixel_id, const RasterSettings& settings) {
    PixelResult r;
    r.stop = static_cast<std::uint32_t>(list.size());
    double t = 1.0;
    for (std::size_t k = 0; k < list.size(); ++k) {
        const std::uint32_t idx = list[k];
        if (!prep.usable[idx]) {
            continue;
        }
        Contribution c;
        if (!evaluate(splats[idx], prep.conics[idx], px, py, settings, c)) {
            continue;
        }
        const double test_t = t * (1.0 - c.alpha);
        if (test_t < settings.min_transmittance) {
            r.stop = static_cast<std::uint32_t>(k);
            break;
        }
        r.color += splats[idx].color * (c.alpha * t);
        t = test_t;
        ++r.count;
        r.hash = mix(r.hash, (pixel_id << 33) ^ (static_cast<std::uint64_t>(idx) << 1) ^ (c.clamped ? 1u : 0u));
    }
    r.transmittance = t;
    return r;
}

RenderOutput make_output(const Camera& camera) {
    RenderOutput out;
    out.color = Image(camera.width, camera.height, 3);
    const std::size_t n = static_cast<std::size_t>(camera.width) * camera.height;
    out.alpha.assign(n, 0.0);
    out.contributors.assign(n, 0);
    return out;
}

void store(RenderOutput& out, int x, int y, const PixelResult& r) {
    const std::size_t p = static_cast<std::size_t>(y) * out.color.width + x;
    for (int c = 0; c < 3; ++c) {
        out.color.at(x, y, c) = r.color[c];
    }
    out.alpha[p] = 1.0 - r.transmittance;
    out.contributors[p] = r.count;
    out.signature = mix(out.signature, r.hash);
}

}  // namespace

RenderOutput rasterize_forward(std::span<const ProjectedSplat> splats, const Camera& camera,
                               const RasterSettings& settings, RasterCache* cache) {
    const Prepared prep = prepare(splats, settings);
    const int ts = settings.tile_size;
    const int tiles_x = (camera.width + ts - 1) / ts;
    const int tiles_y = (camera.height + ts - 1) / ts;
    std::vector<std::vector<std::uint32_t>> tiles(static_cast<std::size_t>(tiles_x) * tiles_y);

    // Binning in global depth order keeps every tile list sorted.
    for (const std::uint32_t idx : depth_order(splats)) {
        if (!prep.usable[idx]) {
            continue;
        }
        const ProjectedSplat& s = splats[idx];
        const double r = splat_radius(s, settings);
        const int x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.x() - r - 0.5)));
        const int x1 = std::min(camera.width - 1, static_cast<int>(std::floor(s.mean2d.x() + r - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.y() - r - 0.5)));
        const int y1 = std::min(camera.height - 1, static_cast<int>(std::floor(s.mean2d.y() + r - 0.5)));
        if (x0 > x1 || y0 > y1) {
            continue;
        }
        for (int ty = y0 / ts; ty <= y1 / ts; ++ty) {
            for (int tx = x0 / ts; tx <= x1 / ts; ++tx) {
                tiles[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(idx);
            }
        }
    }

    RenderOutput out = make_output(camera);
    out.skipped_singular = prep.skipped;
    std::vector<double> final_t;
    std::vector<std::uint32_t> stop;
    if (cache) {
        final_t.assign(static_cast<std::size_t>(camera.width) * camera.height, 1.0);
        stop.assign(final_t.size(), 0);
    }
    // Pixels are visited in row-major order so the signature matches the
    // reference compositor.
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const auto& list = tiles[static_cast<std::size_t>(y / ts) * tiles_x + x / ts];
            const std::uint64_t pid = static_cast<std::uint64_t>(y) * camera.width + x;
            const PixelResult r = composite(list, splats, prep, x + 0.5, y + 0.5, pid, settings);
            store(out, x, y, r);
            if (cache) {
                final_t[pid] = r.transmittance;
                stop[pid] = r.stop;
            }
        }
    }
    if (cache) {
        cache->width = camera.width;
        cache->height = camera.height;
        cache->tiles_x = tiles_x;
        cache->tiles_y = tiles_y;
        cache->settings = settings;
        cache->conics = prep.conics;
        cache->usable = prep.usable;
        cache->tile_lists = std::move(tiles);
        cache->final_transmittance = std::move(final_t);
        cache->stop_index = std::move(stop);
    }
    return out;
}

RenderOutput naive_rasterize(std::span<const ProjectedSplat> splats, const Camera& camera,
                             const RasterSettings& settings) {
    const Prepared prep = prepare(splats, settings);
    const std::vector<std::uint32_t> order = depth_order(splats);
    RenderOutput out = make_output(camera);
    out.skipped_singular = prep.skipped;
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const std::uint64_t pid = static_cast<std::uint64_t>(y) * camera.width + x;
            store(out, x, y, composite(order, splats, prep, x + 0.5, y + 0.5, pid, settings));
        }
    }
    return out;
}

std::vector<SplatGrad2D> rasterize_backward(const RasterCache& cache, std::span<const ProjectedSplat> splats,
                                            const Image& grad_color) {
    if (grad_color.width != cache.width || grad_color.height != cache.height || grad_color.channels != 3) {
        throw ShapeMismatchError("gradient image does not match the rendered image");
    }
    std::vector<SplatGrad2D> grads(splats.size());
    const RasterSettings& settings = cache.settings;
    const int ts = settings.tile_size;
    // Tiles own their pixels; accumulation runs in fixed tile/pixel order.
    for (int ty = 0; ty < cache.tiles_y; ++ty) {
        for (int tx = 0; tx < cache.tiles_x; ++tx) {
            const auto& list = cache.tile_lists[static_cast<std::size_t>(ty) * cache.tiles_x + tx];
            if (list.empty()) {
                continue;
            }
            const int y_end = std::min(cache.height, (ty + 1) * ts);
            const int x_end = std::min(cache.width, (tx + 1) * ts);
            for (int y = ty * ts; y < y_end; ++y) {
                for (int x = tx * ts; x < x_end; ++x) {
                    const std::size_t pid = static_cast<std::size_t>(y) * cache.width + x;
                    const Vec3 d_pixel(grad_color.at(x, y, 0), grad_color.at(x, y, 1), grad_color.at(x, y, 2));
                    if (d_pixel.isZero(0.0)) {
                        continue;
                    }
                    const double px = x + 0.5, py = y + 0.5;
                    double t = cache.final_transmittance[pid];
                    Vec3 accum = Vec3::Zero();
                    double last_alpha = 0.0;
                    Vec3 last_color = Vec3::Zero();
                    for (std::size_t k = cache.stop_index[pid]; k-- > 0;) {
                        const std::uint32_t idx = list[k];
                        if (!cache.usable[idx]) {
                            continue;
                        }
                        const ProjectedSplat& s = splats[idx];
                        const Mat2& conic = cache.conics[idx];
                        Contribution c;
                        if (!evaluate(s, conic, px, py, settings, c)) {
                            continue;
                        }
                        t /= (1.0 - c.alpha);
                        SplatGrad2D& g = grads[idx];
                        g.color += (c.alpha * t) * d_pixel;

                        accum = last_alpha * last_color + (1.0 - last_alpha) * accum;
                        last_alpha = c.alpha;
                        last_color = s.color;
                        const double d_alpha = ((s.color - accum) * t).dot(d_pixel);
                        if (c.clamped) {
                            continue;
                        }
                        g.opacity += c.gauss * d_alpha;
                        const double d_power = c.alpha * d_alpha;
                        const Vec2 d(px - s.mean2d.x(), py - s.mean2d.y());
                        g.mean2d += d_power * (conic * d);
                        // dL/dconic = -0.5 d dᵀ dL/dpower; dL/dcov = -conic dL/dconic conic.
                        const Mat2 d_conic = (-0.5 * d_power) * (d * d.transpose());
                        g.cov2d -= conic * d_conic * conic;
                    }
                }
            }
        }
    }
    return grads;
}

}  // namespace msplat
