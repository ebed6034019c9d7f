#include "msplat/gauss_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msplat/errors.hpp"

namespace msplat {

namespace {

constexpr double kShC1 = 0.4886025119029199;
constexpr double kShC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                            0.5462742152960396};
constexpr double kShC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                            -0.4570457994644658, 1.445305721320277, -0.5900435899266435};

}  // namespace

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DegenerateRotationError("quaternion has zero or non-finite norm");
    }
    return {w / n, x / n, y / n, z / n};
}

Quaternion Quaternion::from_matrix(const Mat3& r) {
    // Shepperd: pick the largest diagonal term for stability.
    const double tr = r.trace();
    Quaternion q;
    if (tr > r(0, 0) && tr > r(1, 1) && tr > r(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + tr);
        q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
        q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
    } else if (r(1, 1) > r(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
        q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
    } else {
        const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
        q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
    }
    if (q.w < 0.0) {
        q = {-q.w, -q.x, -q.y, -q.z};
    }
    return q.normalized();
}

Quaternion Quaternion::from_axis_angle(const Vec3& axis_angle) {
    const double angle = axis_angle.norm();
    if (angle < 1e-12) {
        return identity();
    }
    const Vec3 axis = axis_angle / angle;
    const double s = std::sin(0.5 * angle);
    return {std::cos(0.5 * angle), axis.x() * s, axis.y() * s, axis.z() * s};
}

Mat3 quat_to_matrix(const Quaternion& q) {
    const Quaternion u = q.normalized();
    const double w = u.w, x = u.x, y = u.y, z = u.z;
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Eigen::Matrix4d left_mult_matrix(const Quaternion& a) {
    Eigen::Matrix4d m;
    m << a.w, -a.x, -a.y, -a.z,
        a.x, a.w, -a.z, a.y,
        a.y, a.z, a.w, -a.x,
        a.z, -a.y, a.x, a.w;
    return m;
}

Eigen::Matrix4d right_mult_matrix(const Quaternion& b) {
    Eigen::Matrix4d m;
    m << b.w, -b.x, -b.y, -b.z,
        b.x, b.w, b.z, -b.y,
        b.y, -b.z, b.w, b.x,
        b.z, b.y, -b.x, b.w;
    return m;
}

Quaternion quat_multiply(const Quaternion& a, const Quaternion& b) {
    if (!(a.norm() > 0.0) || !(b.norm() > 0.0)) {
        throw DegenerateRotationError("quat_multiply on a zero-norm quaternion");
    }
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Vec4 quat_normalize_backward(const Quaternion& raw, const Vec4& grad_unit) {
    const double n = raw.norm();
    const Vec4 u = raw.vec() / n;
    return (grad_unit - u * u.dot(grad_unit)) / n;
}

Vec4 quat_to_matrix_backward(const Quaternion& q, const Mat3& g) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 dw, dx, dy, dz;
    dw << 0, -z, y, z, 0, -x, -y, x, 0;
    dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    return 2.0 * Vec4(g.cwiseProduct(dw).sum(), g.cwiseProduct(dx).sum(), g.cwiseProduct(dy).sum(),
                      g.cwiseProduct(dz).sum());
}

Covariance3 Covariance3::from_matrix(const Mat3& m) {
    return {{m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)), m(1, 1), 0.5 * (m(1, 2) + m(2, 1)),
             m(2, 2)}};
}

Mat3 Covariance3::matrix() const {
    Mat3 m;
    m << upper[0], upper[1], upper[2], upper[1], upper[3], upper[4], upper[2], upper[4], upper[5];
    return m;
}

Covariance3 build_covariance(const Quaternion& r, const Vec3& s) {
    if (!(s.array() > 0.0).all()) {
        throw InvalidScaleError("covariance scale must be strictly positive");
    }
    const Mat3 m = quat_to_matrix(r) * s.asDiagonal();
    return Covariance3::from_matrix(m * m.transpose());
}

CovarianceGrad build_covariance_backward(const Quaternion& r_unit, const Vec3& s, const Mat3& grad_sigma) {
    const Mat3 rot = quat_to_matrix(r_unit);
    const Mat3 m = rot * s.asDiagonal();
    const Mat3 sym = grad_sigma + grad_sigma.transpose();
    const Mat3 d_m = sym * m;
    CovarianceGrad out;
    const Mat3 d_rot = d_m * s.asDiagonal();
    for (int j = 0; j < 3; ++j) {
        out.d_scale[j] = d_m.col(j).dot(rot.col(j));
    }
    out.d_rot = quat_to_matrix_backward(r_unit, d_rot);
    return out;
}

// ---------------------------------------------------------------------------

void sh_basis(int degree, const Vec3& dir, std::span<double> out, Eigen::Matrix<double, 16, 3>* d_dir) {
    const double x = dir.x(), y = dir.y(), z = dir.z();
    out[0] = kShY00;
    if (d_dir) {
        d_dir->setZero();
    }
    if (degree < 1) {
        return;
    }
    out[1] = -kShC1 * y;
    out[2] = kShC1 * z;
    out[3] = -kShC1 * x;
    if (d_dir) {
        (*d_dir)(1, 1) = -kShC1;
        (*d_dir)(2, 2) = kShC1;
        (*d_dir)(3, 0) = -kShC1;
    }
    if (degree < 2) {
        return;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, yz = y * z, xz = x * z;
    out[4] = kShC2[0] * xy;
    out[5] = kShC2[1] * yz;
    out[6] = kShC2[2] * (2.0 * zz - xx - yy);
    out[7] = kShC2[3] * xz;
    out[8] = kShC2[4] * (xx - yy);
    if (d_dir) {
        auto& d = *d_dir;
        d.row(4) << kShC2[0] * y, kShC2[0] * x, 0.0;
        d.row(5) << 0.0, kShC2[1] * z, kShC2[1] * y;
        d.row(6) << -2.0 * kShC2[2] * x, -2.0 * kShC2[2] * y, 4.0 * kShC2[2] * z;
        d.row(7) << kShC2[3] * z, 0.0, kShC2[3] * x;
        d.row(8) << 2.0 * kShC2[4] * x, -2.0 * kShC2[4] * y, 0.0;
    }
    if (degree < 3) {
        return;
    }
    out[9] = kShC3[0] * y * (3.0 * xx - yy);
    out[10] = kShC3[1] * xy * z;
    out[11] = kShC3[2] * y * (4.0 * zz - xx - yy);
    out[12] = kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = kShC3[4] * x * (4.0 * zz - xx - yy);
    out[14] = kShC3[5] * z * (xx - yy);
    out[15] = kShC3[6] * x * (xx - 3.0 * yy);
    if (d_dir) {
        auto& d = *d_dir;
        d.row(9) << kShC3[0] * 6.0 * xy, kShC3[0] * (3.0 * xx - 3.0 * yy), 0.0;
        d.row(10) << kShC3[1] * yz, kShC3[1] * xz, kShC3[1] * xy;
        d.row(11) << -kShC3[2] * 2.0 * xy, kShC3[2] * (4.0 * zz - xx - 3.0 * yy), kShC3[2] * 8.0 * yz;
        d.row(12) << -kShC3[3] * 6.0 * xz, -kShC3[3] * 6.0 * yz, kShC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy);
        d.row(13) << kShC3[4] * (4.0 * zz - 3.0 * xx - yy), -kShC3[4] * 2.0 * xy, kShC3[4] * 8.0 * xz;
        d.row(14) << kShC3[5] * 2.0 * xz, -kShC3[5] * 2.0 * yz, kShC3[5] * (xx - yy);
        d.row(15) << kShC3[6] * (3.0 * xx - 3.0 * yy), -kShC3[6] * 6.0 * xy, 0.0;
    }
}

namespace {

void check_sh_size(std::span<const double> coeffs, int degree) {
    if (degree < 0 || degree > kMaxShDegree) {
        throw ConfigError("SH degree must be in [0, 3], got " + std::to_string(degree));
    }
    if (coeffs.size() != 3 * sh_basis_count(degree)) {
        throw ConfigError("SH coefficient count " + std::to_string(coeffs.size()) + " does not match degree " +
                          std::to_string(degree));
    }
}

}  // namespace

ShEval sh_evaluate(std::span<const double> coeffs, int degree, const Vec3& view_dir) {
    check_sh_size(coeffs, degree);
    std::array<double, 16> basis{};
    sh_basis(degree, view_dir, basis);
    const std::size_t count = sh_basis_count(degree);
    Vec3 c = Vec3::Constant(0.5);
    for (std::size_t k = 0; k < count; ++k) {
        for (int ch = 0; ch < 3; ++ch) {
            c[ch] += basis[k] * coeffs[3 * k + ch];
        }
    }
    ShEval out;
    for (int ch = 0; ch < 3; ++ch) {
        out.clamped[ch] = c[ch] < 0.0 || c[ch] > 1.0;
        out.color[ch] = std::clamp(c[ch], 0.0, 1.0);
    }
    return out;
}

Vec3 sh_to_color(std::span<const double> coeffs, int degree, const Vec3& view_dir) {
    return sh_evaluate(coeffs, degree, view_dir).color;
}

Vec3 sh_backward(std::span<const double> coeffs, int degree, const Vec3& view_dir, const ShEval& eval,
                 const Vec3& grad_color, std::span<double> grad_coeffs) {
    std::array<double, 16> basis{};
    Eigen::Matrix<double, 16, 3> d_dir;
    sh_basis(degree, view_dir, basis, &d_dir);
    Vec3 g = grad_color;
    for (int ch = 0; ch < 3; ++ch) {
        if (eval.clamped[ch]) {
            g[ch] = 0.0;
        }
    }
    const std::size_t count = sh_basis_count(degree);
    Vec3 grad_dir = Vec3::Zero();
    for (std::size_t k = 0; k < count; ++k) {
        double dot = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            grad_coeffs[3 * k + ch] += basis[k] * g[ch];
            dot += coeffs[3 * k + ch] * g[ch];
        }
        grad_dir += dot * d_dir.row(static_cast<Eigen::Index>(k)).transpose();
    }
    return grad_dir;
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// ---------------------------------------------------------------------------

Vec3 GaussianSplat::scale() const { return log_scale.array().exp(); }

double GaussianSplat::opacity() const { return sigmoid(opacity_logit); }

Vec3 SplatSet::scale(std::size_t i) const {
    return {std::exp(log_scale[3 * i]), std::exp(log_scale[3 * i + 1]), std::exp(log_scale[3 * i + 2])};
}

GaussianSplat SplatSet::get(std::size_t i) const {
    GaussianSplat s;
    s.mu_local = mu(i);
    s.rot_local = rot(i);
    s.log_scale = {log_scale[3 * i], log_scale[3 * i + 1], log_scale[3 * i + 2]};
    s.opacity_logit = opacity_logit[i];
    const auto coeffs = sh_of(i);
    s.sh_coeffs.assign(coeffs.begin(), coeffs.end());
    s.parent_face = parent_face[i];
    return s;
}

void SplatSet::set(std::size_t i, const GaussianSplat& s) {
    if (s.sh_coeffs.size() != sh_stride()) {
        throw ConfigError("splat SH coefficient count does not match the set's degree");
    }
    for (int k = 0; k < 3; ++k) {
        mu_local[3 * i + k] = s.mu_local[k];
        log_scale[3 * i + k] = s.log_scale[k];
    }
    const Vec4 q = s.rot_local.vec();
    for (int k = 0; k < 4; ++k) {
        rot_local[4 * i + k] = q[k];
    }
    opacity_logit[i] = s.opacity_logit;
    std::copy(s.sh_coeffs.begin(), s.sh_coeffs.end(), sh.begin() + static_cast<std::ptrdiff_t>(i * sh_stride()));
    parent_face[i] = s.parent_face;
}

void SplatSet::push_back(const GaussianSplat& s) {
    const std::size_t i = size();
    mu_local.resize(3 * (i + 1));
    rot_local.resize(4 * (i + 1));
    log_scale.resize(3 * (i + 1));
    opacity_logit.resize(i + 1);
    sh.resize(sh_stride() * (i + 1));
    parent_face.resize(i + 1);
    set(i, s);
}

SplatSet SplatSet::gather(std::span<const std::size_t> indices) const {
    SplatSet out;
    out.sh_degree = sh_degree;
    const std::size_t stride = sh_stride();
    out.mu_local.reserve(3 * indices.size());
    for (const std::size_t i : indices) {
        out.mu_local.insert(out.mu_local.end(), mu_local.begin() + 3 * i, mu_local.begin() + 3 * i + 3);
        out.rot_local.insert(out.rot_local.end(), rot_local.begin() + 4 * i, rot_local.begin() + 4 * i + 4);
        out.log_scale.insert(out.log_scale.end(), log_scale.begin() + 3 * i, log_scale.begin() + 3 * i + 3);
        out.opacity_logit.push_back(opacity_logit[i]);
        out.sh.insert(out.sh.end(), sh.begin() + static_cast<std::ptrdiff_t>(i * stride),
                      sh.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
        out.parent_face.push_back(parent_face[i]);
    }
    return out;
}

}  // namespace msplat
