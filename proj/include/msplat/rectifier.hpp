#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "msplat/gauss_core.hpp"
#include "msplat/mesh_rig.hpp"

namespace msplat {

/// Sin/cos lift of a 3D position over `num_bands` octaves of π.
struct EncoderConfig {
    int num_bands = 6;
    bool include_identity = false;

    std::size_t output_dim() const { return 6 * static_cast<std::size_t>(num_bands) + (include_identity ? 3 : 0); }

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Layout: [x (if identity)], then for k = 0..L-1: sin(2^k π x) (3), cos(2^k π x) (3).
std::vector<double> positional_encode(const Vec3& x, const EncoderConfig& cfg);
void positional_encode_into(const Vec3& x, const EncoderConfig& cfg, std::span<double> out);
Vec3 positional_encode_backward(const Vec3& x, const EncoderConfig& cfg, std::span<const double> grad);

inline constexpr std::size_t kRectifierInputWidth = 105;
inline constexpr std::size_t kRectifierOutputWidth = 10;

struct RectifierConfig {
    EncoderConfig encoder;
    std::size_t pose_dim = kBodyPoseWidth;
    std::vector<int> hidden{128, 164, 128, 128};
    int skip_layer = 3;  // layer index that also receives the raw input

    std::size_t input_dim() const { return encoder.output_dim() + pose_dim; }
    std::size_t num_layers() const { return hidden.size() + 1; }
    std::size_t layer_in(std::size_t l) const;
    std::size_t layer_out(std::size_t l) const;
    /// Throws ConfigError unless input width is 105 and output width 10.
    void validate() const;
    std::size_t param_count() const;

    friend bool operator==(const RectifierConfig&, const RectifierConfig&) = default;
};

/// All weights and biases in one flat buffer: per layer, a column-major
/// (out × in) weight matrix followed by the bias.
struct RectifierParams {
    RectifierConfig config;
    std::vector<double> data;

    /// Fan-in uniform init for hidden layers; final layer zero.
    static RectifierParams initialize(const RectifierConfig& cfg, std::uint64_t seed);
    static RectifierParams zeros(const RectifierConfig& cfg);

    std::size_t weight_offset(std::size_t layer) const;
    std::size_t bias_offset(std::size_t layer) const;
    Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
    Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
    Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);

    friend bool operator==(const RectifierParams&, const RectifierParams&) = default;
};

struct RectifierDeltas {
    Vec3 d_mu = Vec3::Zero();
    Vec4 d_rot = Vec4::Zero();
    Vec3 d_scale = Vec3::Zero();

    static RectifierDeltas from_output(std::span<const double> out10);
};

/// Column-per-sample input matrix: rows are γ(μ*) followed by the pose vector.
Eigen::MatrixXd build_rectifier_inputs(const RectifierConfig& cfg, std::span<const Vec3> mu_star,
                                       std::span<const double> pose_vec);

struct RectifierCache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> activations;  // post-ReLU hidden outputs
};

/// Batched forward; returns the 10 × N output. Throws ConfigError on width mismatch.
Eigen::MatrixXd rectify_forward_batch(const RectifierParams& params, const Eigen::MatrixXd& inputs,
                                      RectifierCache* cache = nullptr);

RectifierDeltas rectify_forward(const RectifierParams& params, const Vec3& mu_star, std::span<const double> pose_vec);

struct RectifierGrads {
    std::vector<double> params;  // same layout as RectifierParams::data
    Eigen::MatrixXd inputs;      // input_dim × N
};

RectifierGrads rectify_backward(const RectifierParams& params, const RectifierCache& cache,
                                const Eigen::MatrixXd& grad_output);

/// Signature of the ReLU on/off pattern, used by tests to detect kinks.
std::uint64_t relu_pattern_hash(const RectifierCache& cache);

// ---------------------------------------------------------------------------

inline constexpr double kMinRectifiedScale = 1e-6;

struct RectifiedGaussian {
    Vec3 mu = Vec3::Zero();
    Quaternion rot;
    Vec3 scale = Vec3::Ones();
    std::array<bool, 3> scale_clamped{};
};

/// μ' = μ* + δμ, r' = normalize(r* ⊗ normalize((1,0,0,0) + δr)), s' = max(s* + δs, 1e-6).
/// Each clamped component increments `*clamp_events` when given.
RectifiedGaussian apply_deltas(const BoundGaussian& bound, const RectifierDeltas& deltas,
                               std::size_t* clamp_events = nullptr);

struct ApplyDeltasGrad {
    Vec3 d_mu_star = Vec3::Zero();
    Vec4 d_rot_star = Vec4::Zero();
    Vec3 d_scale_star = Vec3::Zero();
    RectifierDeltas d_deltas;
};

ApplyDeltasGrad apply_deltas_backward(const BoundGaussian& bound, const RectifierDeltas& deltas,
                                      const RectifiedGaussian& out, const Vec3& grad_mu, const Vec4& grad_rot,
                                      const Vec3& grad_scale);

}  // namespace msplat
