#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace msplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Quaternion (w, x, y, z) with Hamilton product. Stored raw; readers
// normalize. Identity is (1, 0, 0, 0).
struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quaternion identity() { return {}; }
    static Quaternion from_vec(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
    /// Unit quaternion of a proper rotation matrix.
    static Quaternion from_matrix(const Mat3& r);
    /// Unit quaternion rotating by |axis_angle| radians about its direction.
    static Quaternion from_axis_angle(const Vec3& axis_angle);

    Vec4 vec() const { return {w, x, y, z}; }
    double norm() const;
    /// Throws DegenerateRotationError on zero norm.
    Quaternion normalized() const;

    friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

Mat3 quat_to_matrix(const Quaternion& q);
Quaternion quat_multiply(const Quaternion& a, const Quaternion& b);

/// 4x4 matrices with a⊗b = left_mult_matrix(a)·b = right_mult_matrix(b)·a.
Eigen::Matrix4d left_mult_matrix(const Quaternion& a);
Eigen::Matrix4d right_mult_matrix(const Quaternion& b);

/// dL/dq for q ↦ q/|q|, given dL/d(q/|q|).
Vec4 quat_normalize_backward(const Quaternion& raw, const Vec4& grad_unit);
/// dL/dq for a *unit* q, given dL/dR (full 3x3).
Vec4 quat_to_matrix_backward(const Quaternion& unit, const Mat3& grad_r);

struct Covariance3 {
    // xx, xy, xz, yy, yz, zz
    std::array<double, 6> upper{};

    static Covariance3 from_matrix(const Mat3& m);
    Mat3 matrix() const;
};

/// Σ = R·S·Sᵀ·Rᵀ with S = diag(s). Throws InvalidScaleError if any s ≤ 0.
Covariance3 build_covariance(const Quaternion& r, const Vec3& s);

/// Backward of build_covariance for the unit rotation `r_unit` and a
/// symmetric upstream gradient dL/dΣ. Returns dL/dr_unit and dL/ds.
struct CovarianceGrad {
    Vec4 d_rot = Vec4::Zero();
    Vec3 d_scale = Vec3::Zero();
};
CovarianceGrad build_covariance_backward(const Quaternion& r_unit, const Vec3& s, const Mat3& grad_sigma);

// ---------------------------------------------------------------------------
// Spherical harmonics. Coefficients are laid out basis-major:
// coeffs[k * 3 + channel] for k in [0, (degree + 1)^2).

inline constexpr int kMaxShDegree = 3;

constexpr std::size_t sh_basis_count(int degree) {
    return static_cast<std::size_t>((degree + 1) * (degree + 1));
}

/// Real SH basis values (and optionally d/d(dir)) for a unit direction.
void sh_basis(int degree, const Vec3& dir, std::span<double> out, Eigen::Matrix<double, 16, 3>* d_dir = nullptr);

/// Evaluate colour = clamp(Σ c_k Y_k(dir) + 0.5, 0, 1) per channel.
/// Throws ConfigError when `coeffs.size() != 3 * sh_basis_count(degree)`.
Vec3 sh_to_color(std::span<const double> coeffs, int degree, const Vec3& view_dir);

/// Unclamped evaluation with the per-channel clamp mask (true = clamped).
struct ShEval {
    Vec3 color = Vec3::Zero();
    std::array<bool, 3> clamped{};
};
ShEval sh_evaluate(std::span<const double> coeffs, int degree, const Vec3& view_dir);

/// Backward of sh_evaluate. Accumulates dL/dcoeffs into `grad_coeffs` and
/// returns dL/d(view_dir).
Vec3 sh_backward(std::span<const double> coeffs, int degree, const Vec3& view_dir, const ShEval& eval,
                 const Vec3& grad_color, std::span<double> grad_coeffs);

/// Constant that maps a target DC colour c to coefficient (c - 0.5) / Y00.
inline constexpr double kShY00 = 0.28209479177387814;

// ---------------------------------------------------------------------------
// Activations.

double sigmoid(double x);
double logit(double p);

// ---------------------------------------------------------------------------

/// One primitive bound to a parent triangle. Attributes are in the
/// triangle's local frame and stored pre-activation.
struct GaussianSplat {
    Vec3 mu_local = Vec3::Zero();
    Quaternion rot_local;
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    std::vector<double> sh_coeffs;
    std::uint32_t parent_face = 0;

    Vec3 scale() const;
    double opacity() const;
};

/// Structure-of-arrays storage for a set of splats; each array is one
/// optimizer parameter group.
struct SplatSet {
    int sh_degree = 3;
    std::vector<double> mu_local;       // 3 per splat
    std::vector<double> rot_local;      // 4 per splat, (w, x, y, z)
    std::vector<double> log_scale;      // 3 per splat
    std::vector<double> opacity_logit;  // 1 per splat
    std::vector<double> sh;             // sh_stride() per splat
    std::vector<std::uint32_t> parent_face;

    std::size_t size() const { return parent_face.size(); }
    std::size_t sh_stride() const { return 3 * sh_basis_count(sh_degree); }

    GaussianSplat get(std::size_t i) const;
    void set(std::size_t i, const GaussianSplat& s);
    void push_back(const GaussianSplat& s);

    Vec3 mu(std::size_t i) const { return {mu_local[3 * i], mu_local[3 * i + 1], mu_local[3 * i + 2]}; }
    Quaternion rot(std::size_t i) const {
        return {rot_local[4 * i], rot_local[4 * i + 1], rot_local[4 * i + 2], rot_local[4 * i + 3]};
    }
    Vec3 scale(std::size_t i) const;
    double opacity(std::size_t i) const { return sigmoid(opacity_logit[i]); }
    std::span<const double> sh_of(std::size_t i) const { return {sh.data() + i * sh_stride(), sh_stride()}; }

    /// New set holding the splats at `indices`, in that order.
    SplatSet gather(std::span<const std::size_t> indices) const;

    friend bool operator==(const SplatSet&, const SplatSet&) = default;
};

}  // namespace msplat
