#include "msplat/rectifier.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "msplat/errors.hpp"

namespace msplat {

void positional_encode_into(const Vec3& x, const EncoderConfig& cfg, std::span<double> out) {
    std::size_t k = 0;
    if (cfg.include_identity) {
        for (int c = 0; c < 3; ++c) {
            out[k++] = x[c];
        }
    }
    double freq = std::numbers::pi;
    for (int band = 0; band < cfg.num_bands; ++band) {
        for (int c = 0; c < 3; ++c) {
            out[k + static_cast<std::size_t>(c)] = std::sin(freq * x[c]);
            out[k + 3 + static_cast<std::size_t>(c)] = std::cos(freq * x[c]);
        }
        k += 6;
        freq *= 2.0;
    }
}

std::vector<double> positional_encode(const Vec3& x, const EncoderConfig& cfg) {
    std::vector<double> out(cfg.output_dim());
    positional_encode_into(x, cfg, out);
    return out;
}

Vec3 positional_encode_backward(const Vec3& x, const EncoderConfig& cfg, std::span<const double> grad) {
    Vec3 g = Vec3::Zero();
    std::size_t k = 0;
    if (cfg.include_identity) {
        for (int c = 0; c < 3; ++c) {
            g[c] += grad[k++];
        }
    }
    double freq = std::numbers::pi;
    for (int band = 0; band < cfg.num_bands; ++band) {
        for (int c = 0; c < 3; ++c) {
            const double a = freq * x[c];
            g[c] += freq * (std::cos(a) * grad[k + static_cast<std::size_t>(c)] -
                            std::sin(a) * grad[k + 3 + static_cast<std::size_t>(c)]);
        }
        k += 6;
        freq *= 2.0;
    }
    return g;
}

// ---------------------------------------------------------------------------

std::size_t RectifierConfig::layer_in(std::size_t l) const {
    std::size_t in = l == 0 ? input_dim() : static_cast<std::size_t>(hidden[l - 1]);
    if (static_cast<int>(l) == skip_layer && l != 0) {
        in += input_dim();
    }
    return in;
}

std::size_t RectifierConfig::layer_out(std::size_t l) const {
    return l < hidden.size() ? static_cast<std::size_t>(hidden[l]) : kRectifierOutputWidth;
}

void RectifierConfig::validate() const {
    if (input_dim() != kRectifierInputWidth) {
        throw ConfigError("rectifier input width is " + std::to_string(input_dim()) + ", expected 105");
    }
    if (hidden.empty() || skip_layer < 0 || static_cast<std::size_t>(skip_layer) >= num_layers()) {
        throw ConfigError("rectifier needs at least one hidden layer and a valid skip layer");
    }
    for (const int h : hidden) {
        if (h <= 0) {
            throw ConfigError("rectifier hidden widths must be positive");
        }
    }
}

std::size_t RectifierConfig::param_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        total += layer_out(l) * (layer_in(l) + 1);
    }
    return total;
}

std::size_t RectifierParams::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) {
        off += config.layer_out(l) * (config.layer_in(l) + 1);
    }
    return off;
}

std::size_t RectifierParams::bias_offset(std::size_t layer) const {
    return weight_offset(layer) + config.layer_out(layer) * config.layer_in(layer);
}

Eigen::Map<const Eigen::MatrixXd> RectifierParams::weight(std::size_t l) const {
    return {data.data() + weight_offset(l), static_cast<Eigen::Index>(config.layer_out(l)),
            static_cast<Eigen::Index>(config.layer_in(l))};
}

Eigen::Map<Eigen::MatrixXd> RectifierParams::weight(std::size_t l) {
    return {data.data() + weight_offset(l), static_cast<Eigen::Index>(config.layer_out(l)),
            static_cast<Eigen::Index>(config.layer_in(l))};
}

Eigen::Map<const Eigen::VectorXd> RectifierParams::bias(std::size_t l) const {
    return {data.data() + bias_offset(l), static_cast<Eigen::Index>(config.layer_out(l))};
}

Eigen::Map<Eigen::VectorXd> RectifierParams::bias(std::size_t l) {
    return {data.data() + bias_offset(l), static_cast<Eigen::Index>(config.layer_out(l))};
}

RectifierParams RectifierParams::zeros(const RectifierConfig& cfg) {
    cfg.validate();
    RectifierParams p;
    p.config = cfg;
    p.data.assign(cfg.param_count(), 0.0);
    return p;
}

RectifierParams RectifierParams::initialize(const RectifierConfig& cfg, std::uint64_t seed) {
    RectifierParams p = zeros(cfg);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < cfg.num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.layer_in(l)));
        std::uniform_real_distribution<double> dist(-bound, bound);
        auto w = p.weight(l);
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            w.data()[i] = dist(rng);
        }
        auto b = p.bias(l);
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            b[i] = dist(rng);
        }
    }
    return p;
}

RectifierDeltas RectifierDeltas::from_output(std::span<const double> o) {
    RectifierDeltas d;
    d.d_mu = {o[0], o[1], o[2]};
    d.d_rot = {o[3], o[4], o[5], o[6]};
    d.d_scale = {o[7], o[8], o[9]};
    return d;
}

Eigen::MatrixXd build_rectifier_inputs(const RectifierConfig& cfg, std::span<const Vec3> mu_star,
                                       std::span<const double> pose_vec) {
    if (pose_vec.size() != cfg.pose_dim) {
        throw ConfigError("pose vector has " + std::to_string(pose_vec.size()) + " channels, rectifier expects " +
                          std::to_string(cfg.pose_dim));
    }
    const std::size_t enc = cfg.encoder.output_dim();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(cfg.input_dim()), static_cast<Eigen::Index>(mu_star.size()));
    for (std::size_t i = 0; i < mu_star.size(); ++i) {
        double* col = x.col(static_cast<Eigen::Index>(i)).data();
        positional_encode_into(mu_star[i], cfg.encoder, {col, enc});
        std::copy(pose_vec.begin(), pose_vec.end(), col + enc);
    }
    return x;
}

Eigen::MatrixXd rectify_forward_batch(const RectifierParams& params, const Eigen::MatrixXd& inputs,
                                      RectifierCache* cache) {
    const RectifierConfig& cfg = params.config;
    if (static_cast<std::size_t>(inputs.rows()) != cfg.input_dim() || params.data.size() != cfg.param_count()) {
        throw ConfigError("rectifier input has " + std::to_string(inputs.rows()) + " channels, expected " +
                          std::to_string(cfg.input_dim()));
    }
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(cfg.hidden.size());
    Eigen::MatrixXd h;
    for (std::size_t l = 0; l < cfg.num_layers(); ++l) {
        Eigen::MatrixXd layer_input;
        if (l == 0) {
            layer_input = inputs;
        } else if (static_cast<int>(l) == cfg.skip_layer) {
            layer_input.resize(h.rows() + inputs.rows(), inputs.cols());
            layer_input << h, inputs;
        } else {
            layer_input = std::move(h);
        }
        Eigen::MatrixXd z = params.weight(l) * layer_input;
        z.colwise() += params.bias(l);
        if (l + 1 < cfg.num_layers()) {
            h = z.cwiseMax(0.0);
            acts.push_back(h);
        } else {
            h = std::move(z);
        }
    }
    if (cache) {
        cache->input = inputs;
        cache->activations = std::move(acts);
    }
    return h;
}

RectifierDeltas rectify_forward(const RectifierParams& params, const Vec3& mu_star, std::span<const double> pose_vec) {
    const Eigen::MatrixXd x = build_rectifier_inputs(params.config, std::span<const Vec3>(&mu_star, 1), pose_vec);
    const Eigen::MatrixXd out = rectify_forward_batch(params, x);
    return RectifierDeltas::from_output({out.data(), kRectifierOutputWidth});
}

RectifierGrads rectify_backward(const RectifierParams& params, const RectifierCache& cache,
                                const Eigen::MatrixXd& grad_output) {
    const RectifierConfig& cfg = params.config;
    RectifierGrads g;
    g.params.assign(params.data.size(), 0.0);
    g.inputs = Eigen::MatrixXd::Zero(cache.input.rows(), cache.input.cols());

    const std::size_t input_rows = static_cast<std::size_t>(cache.input.rows());
    Eigen::MatrixXd delta = grad_output;  // dL/dz of the current layer
    for (std::size_t l = cfg.num_layers(); l-- > 0;) {
        Eigen::MatrixXd layer_input;
        if (l == 0) {
            layer_input = cache.input;
        } else if (static_cast<int>(l) == cfg.skip_layer) {
            const auto& prev = cache.activations[l - 1];
            layer_input.resize(prev.rows() + cache.input.rows(), cache.input.cols());
            layer_input << prev, cache.input;
        } else {
            layer_input = cache.activations[l - 1];
        }
        Eigen::Map<Eigen::MatrixXd> gw(g.params.data() + params.weight_offset(l),
                                       static_cast<Eigen::Index>(cfg.layer_out(l)),
                                       static_cast<Eigen::Index>(cfg.layer_in(l)));
        Eigen::Map<Eigen::VectorXd> gb(g.params.data() + params.bias_offset(l),
                                       static_cast<Eigen::Index>(cfg.layer_out(l)));
        gw.noalias() = delta * layer_input.transpose();
        // Column-ordered sum: a vectorized row reduction into a map would make
        // the summation order depend on the buffer's alignment.
        gb.setZero();
        for (Eigen::Index c = 0; c < delta.cols(); ++c) {
            gb += delta.col(c);
        }

        Eigen::MatrixXd d_in = params.weight(l).transpose() * delta;
        if (l == 0) {
            g.inputs += d_in;
            break;
        }
        Eigen::MatrixXd d_prev;
        if (static_cast<int>(l) == cfg.skip_layer) {
            const Eigen::Index prev_rows = d_in.rows() - static_cast<Eigen::Index>(input_rows);
            g.inputs += d_in.bottomRows(static_cast<Eigen::Index>(input_rows));
            d_prev = d_in.topRows(prev_rows);
        } else {
            d_prev = std::move(d_in);
        }
        const auto& act = cache.activations[l - 1];
        delta = (act.array() > 0.0).select(d_prev, 0.0);
    }
    return g;
}

std::uint64_t relu_pattern_hash(const RectifierCache& cache) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& a : cache.activations) {
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            h ^= a.data()[i] > 0.0 ? 1u : 0u;
            h *= 1099511628211ull;
        }
    }
    return h;
}

// ---------------------------------------------------------------------------

namespace {

Quaternion delta_quaternion(const Vec4& d_rot) { return Quaternion::from_vec(Vec4(1.0, 0.0, 0.0, 0.0) + d_rot); }

}  // namespace

RectifiedGaussian apply_deltas(const BoundGaussian& bound, const RectifierDeltas& d, std::size_t* clamp_events) {
    RectifiedGaussian out;
    out.mu = bound.mu + d.d_mu;
    out.rot = quat_multiply(bound.rot, delta_quaternion(d.d_rot).normalized()).normalized();
    for (int k = 0; k < 3; ++k) {
        const double s = bound.scale[k] + d.d_scale[k];
        out.scale_clamped[k] = s < kMinRectifiedScale;
        out.scale[k] = out.scale_clamped[k] ? kMinRectifiedScale : s;
        if (out.scale_clamped[k] && clamp_events) {
            ++*clamp_events;
        }
    }
    return out;
}

ApplyDeltasGrad apply_deltas_backward(const BoundGaussian& bound, const RectifierDeltas& d,
                                      const RectifiedGaussian& out, const Vec3& grad_mu, const Vec4& grad_rot,
                                      const Vec3& grad_scale) {
    ApplyDeltasGrad g;
    g.d_mu_star = grad_mu;
    g.d_deltas.d_mu = grad_mu;

    const Quaternion q_delta_raw = delta_quaternion(d.d_rot);
    const Quaternion q_delta = q_delta_raw.normalized();
    const Quaternion product = quat_multiply(bound.rot, q_delta);
    const Vec4 d_product = quat_normalize_backward(product, grad_rot);
    g.d_rot_star = right_mult_matrix(q_delta).transpose() * d_product;
    const Vec4 d_q_delta = left_mult_matrix(bound.rot).transpose() * d_product;
    g.d_deltas.d_rot = quat_normalize_backward(q_delta_raw, d_q_delta);

    for (int k = 0; k < 3; ++k) {
        const double gs = out.scale_clamped[k] ? 0.0 : grad_scale[k];
        g.d_scale_star[k] = gs;
        g.d_deltas.d_scale[k] = gs;
    }
    return g;
}

}  // namespace msplat
