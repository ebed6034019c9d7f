#include "msplat/losses.hpp"

#include <cmath>
#include <string>

#include "msplat/errors.hpp"

namespace msplat {

namespace {

void check_same(const Image& a, const Image& b) {
    if (!a.same_shape(b)) {
        throw ShapeMismatchError("image shapes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                                 "x" + std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                                 std::to_string(b.height) + "x" + std::to_string(b.channels));
    }
}

}  // namespace

double l1_loss(const Image& rendered, const Image& target) {
    check_same(rendered, target);
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        sum += std::abs(rendered.data[i] - target.data[i]);
    }
    return sum / static_cast<double>(rendered.size());
}

Image l1_loss_grad(const Image& rendered, const Image& target) {
    check_same(rendered, target);
    Image g(rendered.width, rendered.height, rendered.channels);
    const double inv = 1.0 / static_cast<double>(rendered.size());
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        g.data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    return g;
}

double mse(const Image& rendered, const Image& target) {
    check_same(rendered, target);
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        sum += d * d;
    }
    return sum / static_cast<double>(rendered.size());
}

double psnr(const Image& rendered, const Image& target) {
    const double m = mse(rendered, target);
    if (m < 1e-10) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

// ---------------------------------------------------------------------------
// SSIM with a separable Gaussian window, valid positions only.

namespace {

struct Plane {
    int w = 0;
    int h = 0;
    std::vector<double> v;
    Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
    double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

std::vector<double> gaussian_window(const SsimConfig& cfg) {
    std::vector<double> g(static_cast<std::size_t>(cfg.window));
    const double c = 0.5 * (cfg.window - 1);
    double sum = 0.0;
    for (int i = 0; i < cfg.window; ++i) {
        g[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * cfg.sigma * cfg.sigma));
        sum += g[static_cast<std::size_t>(i)];
    }
    for (double& x : g) {
        x /= sum;
    }
    return g;
}

Plane filter_valid(const Plane& in, const std::vector<double>& g) {
    const int k = static_cast<int>(g.size());
    Plane tmp(in.w - k + 1, in.h);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < tmp.w; ++x) {
            double s = 0.0;
            for (int i = 0; i < k; ++i) {
                s += g[static_cast<std::size_t>(i)] * in.at(x + i, y);
            }
            tmp.at(x, y) = s;
        }
    }
    Plane out(tmp.w, in.h - k + 1);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            double s = 0.0;
            for (int i = 0; i < k; ++i) {
                s += g[static_cast<std::size_t>(i)] * tmp.at(x, y + i);
            }
            out.at(x, y) = s;
        }
    }
    return out;
}

// Adjoint of filter_valid.
Plane filter_adjoint(const Plane& in, const std::vector<double>& g) {
    const int k = static_cast<int>(g.size());
    Plane tmp(in.w, in.h + k - 1);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            for (int i = 0; i < k; ++i) {
                tmp.at(x, y + i) += g[static_cast<std::size_t>(i)] * in.at(x, y);
            }
        }
    }
    Plane out(in.w + k - 1, tmp.h);
    for (int y = 0; y < tmp.h; ++y) {
        for (int x = 0; x < tmp.w; ++x) {
            for (int i = 0; i < k; ++i) {
                out.at(x + i, y) += g[static_cast<std::size_t>(i)] * tmp.at(x, y);
            }
        }
    }
    return out;
}

Plane channel(const Image& img, int c) {
    Plane p(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            p.at(x, y) = img.at(x, y, c);
        }
    }
    return p;
}

Plane product(const Plane& a, const Plane& b) {
    Plane p(a.w, a.h);
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        p.v[i] = a.v[i] * b.v[i];
    }
    return p;
}

struct SsimMaps {
    Plane mu_x, mu_y, sxx, syy, sxy;
};

SsimMaps ssim_maps(const Plane& x, const Plane& y, const std::vector<double>& g) {
    SsimMaps m{filter_valid(x, g), filter_valid(y, g), filter_valid(product(x, x), g),
               filter_valid(product(y, y), g), filter_valid(product(x, y), g)};
    for (std::size_t i = 0; i < m.mu_x.v.size(); ++i) {
        m.sxx.v[i] -= m.mu_x.v[i] * m.mu_x.v[i];
        m.syy.v[i] -= m.mu_y.v[i] * m.mu_y.v[i];
        m.sxy.v[i] -= m.mu_x.v[i] * m.mu_y.v[i];
    }
    return m;
}

void check_ssim_inputs(const Image& a, const Image& b, const SsimConfig& cfg) {
    check_same(a, b);
    if (a.width < cfg.window || a.height < cfg.window) {
        throw ShapeMismatchError("image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                                 " is smaller than the SSIM window " + std::to_string(cfg.window));
    }
}

}  // namespace

double ssim(const Image& rendered, const Image& target, const SsimConfig& cfg) {
    check_ssim_inputs(rendered, target, cfg);
    const auto g = gaussian_window(cfg);
    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < rendered.channels; ++c) {
        const SsimMaps m = ssim_maps(channel(rendered, c), channel(target, c), g);
        for (std::size_t i = 0; i < m.mu_x.v.size(); ++i) {
            const double mx = m.mu_x.v[i], my = m.mu_y.v[i];
            total += ((2.0 * mx * my + cfg.c1) * (2.0 * m.sxy.v[i] + cfg.c2)) /
                     ((mx * mx + my * my + cfg.c1) * (m.sxx.v[i] + m.syy.v[i] + cfg.c2));
        }
        count += m.mu_x.v.size();
    }
    return total / static_cast<double>(count);
}

SsimWithGrad ssim_with_grad(const Image& rendered, const Image& target, const SsimConfig& cfg) {
    check_ssim_inputs(rendered, target, cfg);
    const auto g = gaussian_window(cfg);
    SsimWithGrad r{0.0, Image(rendered.width, rendered.height, rendered.channels)};
    const std::size_t positions = static_cast<std::size_t>(rendered.width - cfg.window + 1) *
                                  static_cast<std::size_t>(rendered.height - cfg.window + 1);
    const double inv = 1.0 / static_cast<double>(positions * static_cast<std::size_t>(rendered.channels));
    double total = 0.0;
    for (int c = 0; c < rendered.channels; ++c) {
        const Plane x = channel(rendered, c);
        const Plane y = channel(target, c);
        const SsimMaps m = ssim_maps(x, y, g);
        Plane a(m.mu_x.w, m.mu_x.h), b(a.w, a.h), cxy(a.w, a.h);
        for (std::size_t i = 0; i < a.v.size(); ++i) {
            const double mx = m.mu_x.v[i], my = m.mu_y.v[i];
            const double l1 = 2.0 * mx * my + cfg.c1;
            const double l2 = mx * mx + my * my + cfg.c1;
            const double m1 = 2.0 * m.sxy.v[i] + cfg.c2;
            const double m2 = m.sxx.v[i] + m.syy.v[i] + cfg.c2;
            const double s = (l1 * m1) / (l2 * m2);
            total += s;
            const double d_mu = 2.0 * my * m1 / (l2 * m2) - s * 2.0 * mx / l2;
            const double d_sxx = -s / m2;
            const double d_sxy = 2.0 * l1 / (l2 * m2);
            a.v[i] = d_mu - 2.0 * mx * d_sxx - my * d_sxy;
            b.v[i] = d_sxx;
            cxy.v[i] = d_sxy;
        }
        const Plane ga = filter_adjoint(a, g);
        const Plane gb = filter_adjoint(b, g);
        const Plane gc = filter_adjoint(cxy, g);
        for (int py = 0; py < rendered.height; ++py) {
            for (int px = 0; px < rendered.width; ++px) {
                r.grad.at(px, py, c) =
                    inv * (ga.at(px, py) + 2.0 * x.at(px, py) * gb.at(px, py) + y.at(px, py) * gc.at(px, py));
            }
        }
    }
    r.value = total * inv;
    return r;
}

Image ssim_grad(const Image& rendered, const Image& target, const SsimConfig& cfg) {
    return ssim_with_grad(rendered, target, cfg).grad;
}

// ---------------------------------------------------------------------------

double reg_pos(std::span<const double> mu, double eps, std::span<double> grad) {
    const std::size_t n = mu.size() / 3;
    if (n == 0) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 v;
        for (int k = 0; k < 3; ++k) {
            v[k] = std::max(std::abs(mu[3 * i + k]) - eps, 0.0);
        }
        const double norm = v.norm();
        total += norm;
        if (!grad.empty() && norm > 0.0) {
            for (int k = 0; k < 3; ++k) {
                if (v[k] > 0.0) {
                    const double sign = mu[3 * i + k] > 0.0 ? 1.0 : -1.0;
                    grad[3 * i + k] += sign * v[k] / (norm * static_cast<double>(n));
                }
            }
        }
    }
    return total / static_cast<double>(n);
}

double reg_scaling(std::span<const double> scale, double eps, std::span<double> grad) {
    const std::size_t n = scale.size() / 3;
    if (n == 0) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 v;
        for (int k = 0; k < 3; ++k) {
            v[k] = std::max(scale[3 * i + k] - eps, 0.0);
        }
        const double norm = v.norm();
        total += norm;
        if (!grad.empty() && norm > 0.0) {
            for (int k = 0; k < 3; ++k) {
                grad[3 * i + k] += v[k] / (norm * static_cast<double>(n));
            }
        }
    }
    return total / static_cast<double>(n);
}

double reg_offset(std::span<const double> deltas, std::span<double> grad) {
    const std::size_t n = deltas.size() / kRectifierOutputWidth;
    if (n == 0) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t k = 0; k < kRectifierOutputWidth; ++k) {
            const double d = deltas[kRectifierOutputWidth * i + k];
            sq += d * d;
        }
        const double norm = std::sqrt(sq);
        total += norm;
        if (!grad.empty() && norm > 0.0) {
            for (std::size_t k = 0; k < kRectifierOutputWidth; ++k) {
                grad[kRectifierOutputWidth * i + k] +=
                    deltas[kRectifierOutputWidth * i + k] / (norm * static_cast<double>(n));
            }
        }
    }
    return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

void LossWeights::validate() const {
    const double all[] = {rgb, ssim, lpips, pos, scaling, offset};
    for (const double w : all) {
        if (!(w >= 0.0)) {
            throw ConfigError("loss weights must be non-negative");
        }
    }
}

LossReport total_loss(const LossTerms& terms, const LossWeights& weights) {
    weights.validate();
    LossReport r;
    r.raw = terms;
    r.weighted.rgb = weights.rgb * terms.rgb;
    r.weighted.ssim = weights.ssim * terms.ssim;
    if (terms.lpips) {
        r.weighted.lpips = weights.lpips * *terms.lpips;
    }
    r.weighted.pos = weights.pos * terms.pos;
    r.weighted.scaling = weights.scaling * terms.scaling;
    r.weighted.offset = weights.offset * terms.offset;
    r.total = r.weighted.rgb + r.weighted.ssim + r.weighted.lpips.value_or(0.0) + r.weighted.pos +
              r.weighted.scaling + r.weighted.offset;
    return r;
}

}  // namespace msplat
