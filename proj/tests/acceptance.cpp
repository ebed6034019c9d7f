// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.
//
//   acceptance            run every criterion
//   acceptance 3 7        run only the listed criteria

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "msplat/checkpoint.hpp"
#include "msplat/dataset.hpp"
#include "msplat/losses.hpp"
#include "msplat/pipeline.hpp"
#include "msplat/synth.hpp"
#include "msplat/trainer.hpp"
#include "test_util.hpp"

using namespace msplat;
using namespace msplat::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Bulge amplitude (per radian of bend) and run length for criterion 4.
constexpr double kBulge = 0.3;
constexpr int kBulgeIters = 5000;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path work_root() {
    static const fs::path root = [] {
        const fs::path r = fs::temp_directory_path() / ("msplat_acceptance_" + std::to_string(std::random_device{}()));
        fs::create_directories(r);
        return r;
    }();
    return root;
}

// ---------------------------------------------------------------------------
// 1. Tiled vs reference rasterizer.

Outcome criterion_1() {
    const auto t0 = Clock::now();
    const Camera cam = test_camera(128, 128, 110.0);
    double worst = 0.0;
    std::size_t total_splats = 0;
    bool signatures_match = true;
    for (std::uint64_t scene = 0; scene < 20; ++scene) {
        std::mt19937_64 rng(1000 + scene);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const int count = 50 + static_cast<int>(u(rng) * 450);
        std::vector<ProjectedSplat> splats;
        for (int i = 0; i < count; ++i) {
            const Vec3 mu(2.4 * u(rng) - 1.2, 2.4 * u(rng) - 1.2, 2.0 + 3.0 * u(rng));
            const Vec3 s(0.01 + 0.15 * u(rng), 0.01 + 0.15 * u(rng), 0.01 + 0.15 * u(rng));
            auto p = project_gaussian(mu, build_covariance(random_quat(rng), s), cam);
            if (!p) {
                continue;
            }
            p->color = Vec3(u(rng), u(rng), u(rng));
            p->opacity = u(rng) < 0.1 ? 1.0 : u(rng);
            splats.push_back(*p);
        }
        total_splats += splats.size();
        const RenderOutput tiled = rasterize_forward(splats, cam);
        const RenderOutput naive = naive_rasterize(splats, cam);
        for (std::size_t i = 0; i < tiled.color.size(); ++i) {
            worst = std::max(worst, std::abs(tiled.color.data[i] - naive.color.data[i]));
        }
        signatures_match = signatures_match && tiled.signature == naive.signature;
    }
    const double elapsed = seconds_since(t0);
    return {worst < 1e-6 && elapsed < 60.0,
            fmt("tiled vs reference max |diff| = %.3g over 20 scenes (%zu splats, signatures %s), %.1f s", worst,
                total_splats, signatures_match ? "equal" : "differ", elapsed)};
}

// ---------------------------------------------------------------------------
// 2. Finite-difference gradient suites.

struct FdTally {
    std::size_t compared = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    double worst = 0.0;

    void add(double analytic, double fd, double tol, double floor) {
        ++compared;
        const double e = rel_err(analytic, fd, floor);
        worst = std::max(worst, e);
        if (!(e < tol)) {
            ++failed;
        }
    }
};

FdTally suite_gauss_core() {
    FdTally t;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const Quaternion q = random_quat(rng);
        const Vec3 s = random_vec3(rng, 0.1, 1.0);
        Mat3 gs = Mat3::Random();
        gs = 0.5 * (gs + gs.transpose()).eval();
        auto loss = [&](const Quaternion& r, const Vec3& sc) {
            return (build_covariance(r, sc).matrix().array() * gs.array()).sum();
        };
        const CovarianceGrad g = build_covariance_backward(q, s, gs);
        // Raw quaternion components reach the covariance through normalization.
        const Vec4 d_raw = quat_normalize_backward(q, g.d_rot);
        for (int k = 0; k < 4; ++k) {
            Vec4 p = q.vec(), m = q.vec();
            p[k] += 1e-6;
            m[k] -= 1e-6;
            t.add(d_raw[k], (loss(Quaternion::from_vec(p), s) - loss(Quaternion::from_vec(m), s)) / 2e-6, 1e-3, 1e-6);
        }
        for (int k = 0; k < 3; ++k) {
            Vec3 p = s, m = s;
            p[k] += 1e-6;
            m[k] -= 1e-6;
            t.add(g.d_scale[k], (loss(q, p) - loss(q, m)) / 2e-6, 1e-3, 1e-6);
        }

        const int degree = static_cast<int>(seed % 4);
        std::vector<double> coeffs(3 * sh_basis_count(degree));
        for (double& c : coeffs) {
            c = 0.1 * random_vec3(rng).x();
        }
        const Vec3 dir = random_unit(rng);
        const Vec3 gc = random_vec3(rng);
        const ShEval ev = sh_evaluate(coeffs, degree, dir);
        std::vector<double> gcoef(coeffs.size(), 0.0);
        sh_backward(coeffs, degree, dir, ev, gc, gcoef);
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            auto p = coeffs, m = coeffs;
            p[k] += 1e-6;
            m[k] -= 1e-6;
            const ShEval ep = sh_evaluate(p, degree, dir), em = sh_evaluate(m, degree, dir);
            if (ep.clamped != ev.clamped || em.clamped != ev.clamped) {
                ++t.skipped;
                continue;
            }
            t.add(gcoef[k], gc.dot(ep.color - em.color) / 2e-6, 1e-3, 1e-6);
        }
    }
    return t;
}

FdTally suite_projection() {
    FdTally t;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(100 + seed);
        Camera cam = test_camera(64, 64, 50.0);
        cam.world_to_camera.topLeftCorner<3, 3>() = quat_to_matrix(random_quat(rng));
        cam.world_to_camera.topRightCorner<3, 1>() = Vec3(0, 0, 3);
        const Vec3 mu = cam.rotation().transpose() * (Vec3(0.1, -0.1, 3.0) + 0.2 * random_vec3(rng) - cam.translation());
        const Covariance3 sigma = build_covariance(random_quat(rng), random_vec3(rng, 0.05, 0.3));
        const Vec2 gm = random_vec3(rng).head<2>();
        const Mat2 gc = Mat2::Random();
        auto loss = [&](const Vec3& m, const Mat3& s) {
            const auto p = project_gaussian(m, Covariance3::from_matrix(s), cam);
            return gm.dot(p->mean2d) + (gc.array() * p->cov2d.array()).sum();
        };
        const ProjectionGrad g = project_gaussian_backward(mu, sigma, cam, gm, gc);
        for (int k = 0; k < 3; ++k) {
            Vec3 p = mu, m = mu;
            p[k] += 1e-6;
            m[k] -= 1e-6;
            t.add(g.d_mu[k], (loss(p, sigma.matrix()) - loss(m, sigma.matrix())) / 2e-6, 1e-3, 1e-6);
        }
        for (int a = 0; a < 3; ++a) {
            for (int b = a; b < 3; ++b) {
                Mat3 p = sigma.matrix(), m = sigma.matrix();
                p(a, b) += 1e-6;
                m(a, b) -= 1e-6;
                if (a != b) {
                    p(b, a) += 1e-6;
                    m(b, a) -= 1e-6;
                }
                const double analytic = a == b ? g.d_sigma(a, a) : g.d_sigma(a, b) + g.d_sigma(b, a);
                t.add(analytic, (loss(mu, p) - loss(mu, m)) / 2e-6, 1e-3, 1e-6);
            }
        }
    }
    return t;
}

FdTally suite_compositing() {
    FdTally t;
    const int w = 24, h = 20;
    const Camera cam = test_camera(w, h);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(200 + seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<ProjectedSplat> splats(8);
        for (auto& s : splats) {
            s.mean2d = Vec2(u(rng) * w, u(rng) * h);
            const double a = 1.0 + 6.0 * u(rng), b = 1.0 + 6.0 * u(rng), c = (u(rng) - 0.5) * std::sqrt(a * b);
            s.cov2d << a, c, c, b;
            s.depth = 1.0 + u(rng);
            s.color = Vec3(u(rng), u(rng), u(rng));
            s.opacity = 0.1 + 0.8 * u(rng);
        }
        const Image weights = random_image(rng, w, h, -1.0, 1.0);
        RasterCache cache;
        const RenderOutput base = rasterize_forward(splats, cam, {}, &cache);
        const auto grads = rasterize_backward(cache, splats, weights);
        auto loss = [&](const std::vector<ProjectedSplat>& s, std::uint64_t* sig) {
            const RenderOutput o = rasterize_forward(s, cam);
            *sig = o.signature;
            double v = 0.0;
            for (std::size_t i = 0; i < o.color.size(); ++i) {
                v += weights.data[i] * o.color.data[i];
            }
            return v;
        };
        auto check = [&](auto&& perturb, double analytic, double step) {
            auto p = splats, m = splats;
            perturb(p, step);
            perturb(m, -step);
            std::uint64_t sp = 0, sm = 0;
            const double fd = (loss(p, &sp) - loss(m, &sm)) / (2 * step);
            if (sp != base.signature || sm != base.signature) {
                ++t.skipped;
                return;
            }
            t.add(analytic, fd, 1e-2, 1e-6);
        };
        for (std::size_t i = 0; i < splats.size(); ++i) {
            for (int k = 0; k < 2; ++k) {
                check([&](auto& s, double d) { s[i].mean2d[k] += d; }, grads[i].mean2d[k], 1e-5);
            }
            for (int k = 0; k < 3; ++k) {
                check([&](auto& s, double d) { s[i].color[k] += d; }, grads[i].color[k], 1e-5);
            }
            check([&](auto& s, double d) { s[i].opacity += d; }, grads[i].opacity, 1e-6);
            check([&](auto& s, double d) { s[i].cov2d(0, 0) += d; }, grads[i].cov2d(0, 0), 1e-5);
            check([&](auto& s, double d) { s[i].cov2d(1, 1) += d; }, grads[i].cov2d(1, 1), 1e-5);
            check(
                [&](auto& s, double d) {
                    s[i].cov2d(0, 1) += d;
                    s[i].cov2d(1, 0) += d;
                },
                grads[i].cov2d(0, 1) + grads[i].cov2d(1, 0), 1e-5);
        }
    }
    return t;
}

FdTally suite_rectifier() {
    FdTally t;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RectifierParams p = RectifierParams::initialize(RectifierConfig{}, seed);
        std::mt19937_64 rng(300 + seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const std::size_t last = p.config.num_layers() - 1;
        for (std::size_t i = p.weight_offset(last); i < p.data.size(); ++i) {
            p.data[i] = 0.03 * u(rng);
        }
        for (std::size_t l = 0; l < last; ++l) {
            for (Eigen::Index i = 0; i < p.bias(l).size(); ++i) {
                p.bias(l)[i] = 0.05 * u(rng);
            }
        }
        const int n = 4;
        std::vector<Vec3> mu(n);
        for (Vec3& m : mu) {
            m = random_vec3(rng);
        }
        std::vector<double> pose(kBodyPoseWidth);
        for (double& v : pose) {
            v = 0.8 * u(rng);
        }
        const Eigen::MatrixXd x = build_rectifier_inputs(p.config, mu, pose);
        const Eigen::MatrixXd go = Eigen::MatrixXd::Random(kRectifierOutputWidth, n);
        RectifierCache cache;
        rectify_forward_batch(p, x, &cache);
        const std::uint64_t pattern = relu_pattern_hash(cache);
        const RectifierGrads g = rectify_backward(p, cache, go);
        auto loss = [&](const RectifierParams& q, const Eigen::MatrixXd& in, std::uint64_t* hash) {
            RectifierCache c;
            const Eigen::MatrixXd y = rectify_forward_batch(q, in, &c);
            *hash = relu_pattern_hash(c);
            return (y.array() * go.array()).sum();
        };
        std::uniform_int_distribution<std::size_t> pick(0, p.data.size() - 1);
        for (int k = 0; k < 80; ++k) {
            const std::size_t i = k < 20 ? p.weight_offset(last) + static_cast<std::size_t>(k) : pick(rng);
            RectifierParams a = p, b = p;
            a.data[i] += 1e-6;
            b.data[i] -= 1e-6;
            std::uint64_t ha = 0, hb = 0;
            const double fd = (loss(a, x, &ha) - loss(b, x, &hb)) / 2e-6;
            if (ha != pattern || hb != pattern) {
                ++t.skipped;
                continue;
            }
            t.add(g.params[i], fd, 1e-3, 1e-6);
        }
        for (int k = 0; k < 20; ++k) {
            const Eigen::Index r = static_cast<Eigen::Index>(pick(rng) % x.rows());
            const Eigen::Index c = static_cast<Eigen::Index>(k % n);
            Eigen::MatrixXd a = x, b = x;
            a(r, c) += 1e-6;
            b(r, c) -= 1e-6;
            std::uint64_t ha = 0, hb = 0;
            const double fd = (loss(p, a, &ha) - loss(p, b, &hb)) / 2e-6;
            if (ha != pattern || hb != pattern) {
                ++t.skipped;
                continue;
            }
            t.add(g.inputs(r, c), fd, 1e-3, 1e-6);
        }

        // Delta application: μ' = μ* + δμ, r' = r* ⊗ (1 + δr), s' = s* + δs.
        BoundGaussian bound{random_vec3(rng), random_quat(rng), random_vec3(rng, 0.2, 1.0)};
        RectifierDeltas d;
        d.d_mu = 0.1 * random_vec3(rng);
        d.d_rot = 0.1 * Vec4::Random();
        d.d_scale = 0.05 * random_vec3(rng);
        const Vec3 gmu = random_vec3(rng), gsc = random_vec3(rng);
        const Vec4 grot = Vec4::Random();
        const RectifiedGaussian out = apply_deltas(bound, d, nullptr);
        const ApplyDeltasGrad ag = apply_deltas_backward(bound, d, out, gmu, grot, gsc);
        auto dloss = [&](const BoundGaussian& bb, const RectifierDeltas& dd) {
            const RectifiedGaussian o = apply_deltas(bb, dd, nullptr);
            return gmu.dot(o.mu) + grot.dot(o.rot.vec()) + gsc.dot(o.scale);
        };
        for (int k = 0; k < 4; ++k) {
            RectifierDeltas a = d, b = d;
            a.d_rot[k] += 1e-6;
            b.d_rot[k] -= 1e-6;
            t.add(ag.d_deltas.d_rot[k], (dloss(bound, a) - dloss(bound, b)) / 2e-6, 1e-3, 1e-6);
            BoundGaussian ba = bound, bb = bound;
            Vec4 ra = bound.rot.vec(), rb = bound.rot.vec();
            ra[k] += 1e-6;
            rb[k] -= 1e-6;
            ba.rot = Quaternion::from_vec(ra);
            bb.rot = Quaternion::from_vec(rb);
            t.add(ag.d_rot_star[k], (dloss(ba, d) - dloss(bb, d)) / 2e-6, 1e-3, 1e-6);
        }
        for (int k = 0; k < 3; ++k) {
            RectifierDeltas a = d, b = d;
            a.d_mu[k] += 1e-6;
            b.d_mu[k] -= 1e-6;
            t.add(ag.d_deltas.d_mu[k], (dloss(bound, a) - dloss(bound, b)) / 2e-6, 1e-3, 1e-6);
            a = d;
            b = d;
            a.d_scale[k] += 1e-6;
            b.d_scale[k] -= 1e-6;
            t.add(ag.d_deltas.d_scale[k], (dloss(bound, a) - dloss(bound, b)) / 2e-6, 1e-3, 1e-6);
        }
    }
    return t;
}

FdTally suite_losses() {
    FdTally t;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(400 + seed);
        const Image a = random_image(rng, 16, 14);
        const Image b = random_image(rng, 16, 14);
        const Image l1g = l1_loss_grad(a, b);
        const Image sg = ssim_grad(a, b);
        std::uniform_int_distribution<std::size_t> pick(0, a.size() - 1);
        for (int k = 0; k < 30; ++k) {
            const std::size_t i = pick(rng);
            Image p = a, m = a;
            p.data[i] += 1e-6;
            m.data[i] -= 1e-6;
            t.add(l1g.data[i], (l1_loss(p, b) - l1_loss(m, b)) / 2e-6, 1e-3, 1e-8);
            t.add(sg.data[i], (ssim(p, b) - ssim(m, b)) / 2e-6, 1e-3, 1e-8);
        }

        const std::size_t n = 12;
        std::vector<double> mu(3 * n), scale(3 * n), deltas(kRectifierOutputWidth * n);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        for (double& v : mu) {
            v = u(rng);
        }
        for (double& v : scale) {
            v = 1.0 + 0.5 * u(rng);
        }
        for (double& v : deltas) {
            v = 0.3 * u(rng);
        }
        auto reg_check = [&](auto&& fn, std::vector<double>& x, double eps, double kink) {
            std::vector<double> g(x.size(), 0.0);
            fn(std::span<const double>(x), eps, std::span<double>(g));
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (std::abs(std::abs(x[i]) - kink) < 1e-4) {
                    ++t.skipped;
                    continue;
                }
                const double keep = x[i];
                x[i] = keep + 1e-6;
                const double fp = fn(std::span<const double>(x), eps, std::span<double>());
                x[i] = keep - 1e-6;
                const double fm = fn(std::span<const double>(x), eps, std::span<double>());
                x[i] = keep;
                t.add(g[i], (fp - fm) / 2e-6, 1e-3, 1e-8);
            }
        };
        reg_check([](auto x, double e, auto g) { return reg_pos(x, e, g); }, mu, kDefaultEpsPos, kDefaultEpsPos);
        reg_check([](auto x, double e, auto g) { return reg_scaling(x, e, g); }, scale, kDefaultEpsScaling,
                  kDefaultEpsScaling);
        reg_check([](auto x, double, auto g) { return reg_offset(x, g); }, deltas, 0.0, -1.0);
    }
    return t;
}

SplatSet random_splats_on(const RiggedMesh& mesh, std::mt19937_64& rng, int per_face, int degree) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SplatSet s;
    s.sh_degree = degree;
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        for (int k = 0; k < per_face; ++k) {
            GaussianSplat g;
            g.parent_face = f;
            g.mu_local = Vec3(0.3 * u(rng), 0.05 * u(rng), 0.3 * u(rng));
            g.rot_local = random_quat(rng);
            g.log_scale = Vec3::Constant(std::log(0.25)) + 0.3 * Vec3(u(rng), u(rng), u(rng));
            g.opacity_logit = 0.8 * u(rng);
            g.sh_coeffs.resize(3 * sh_basis_count(degree));
            for (double& c : g.sh_coeffs) {
                c = 0.3 * u(rng);
            }
            s.push_back(g);
        }
    }
    return s;
}

// Skinning, triangle frames, binding, rectification, projection and
// compositing, differentiated end to end.
FdTally suite_binding_chain() {
    FdTally t;
    const RiggedMesh mesh = test_strip(2);
    const Camera cam = test_camera(32, 32, 40.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(600 + seed);
        SplatSet splats = random_splats_on(mesh, rng, 2, static_cast<int>(seed % 4));
        RectifierParams rect = RectifierParams::initialize(RectifierConfig{}, seed);
        std::uniform_real_distribution<double> u(-0.01, 0.01);
        const std::size_t last = rect.config.num_layers() - 1;
        for (std::size_t i = rect.weight_offset(last); i < rect.data.size(); ++i) {
            rect.data[i] = u(rng);
        }
        Pose pose = Pose::rest(mesh.num_joints());
        pose.joint_rotations[1] = 0.3 * random_vec3(rng);
        const auto posed = pose_mesh(mesh, pose);
        const Image weights = random_image(rng, cam.width, cam.height, -1.0, 1.0);
        std::vector<double> dw(kRectifierOutputWidth * splats.size());
        for (double& d : dw) {
            d = random_vec3(rng).x();
        }
        struct Eval {
            double loss;
            std::uint64_t sig, relu;
            std::size_t clamps;
        };
        auto evaluate = [&]() {
            const FrameState st = render_frame(splats, &rect, posed, mesh.faces, pose, cam);
            Eval e{0.0, st.render.signature, relu_pattern_hash(st.rect_cache), st.scale_clamp_events};
            for (std::size_t i = 0; i < weights.size(); ++i) {
                e.loss += weights.data[i] * st.render.color.data[i];
            }
            for (std::size_t i = 0; i < st.deltas.size(); ++i) {
                e.loss += dw[i] * st.deltas[i];
            }
            return e;
        };
        const FrameState st = render_frame(splats, &rect, posed, mesh.faces, pose, cam);
        const ModelGrads g = backward_frame(st, splats, &rect, cam, weights, dw);
        const Eval base = evaluate();
        auto check = [&](double& slot, double analytic) {
            const double keep = slot;
            slot = keep + 1e-6;
            const Eval p = evaluate();
            slot = keep - 1e-6;
            const Eval m = evaluate();
            slot = keep;
            const auto same = [&](const Eval& e) {
                return e.sig == base.sig && e.relu == base.relu && e.clamps == base.clamps;
            };
            if (!same(p) || !same(m)) {
                ++t.skipped;
                return;
            }
            t.add(analytic, (p.loss - m.loss) / 2e-6, 1e-2, 1e-5);
        };
        for (std::size_t i = 0; i < splats.mu_local.size(); ++i) {
            check(splats.mu_local[i], g.mu_local[i]);
            check(splats.log_scale[i], g.log_scale[i]);
        }
        for (std::size_t i = 0; i < splats.rot_local.size(); ++i) {
            check(splats.rot_local[i], g.rot_local[i]);
        }
        for (std::size_t i = 0; i < splats.opacity_logit.size(); ++i) {
            check(splats.opacity_logit[i], g.opacity_logit[i]);
        }
        for (std::size_t i = 0; i < splats.sh.size(); ++i) {
            check(splats.sh[i], g.sh[i]);
        }
        std::uniform_int_distribution<std::size_t> pick(0, rect.data.size() - 1);
        for (int k = 0; k < 40; ++k) {
            const std::size_t i = pick(rng);
            check(rect.data[i], g.rectifier[i]);
        }
    }
    return t;
}

Outcome criterion_2() {
    const auto t0 = Clock::now();
    const std::vector<std::pair<std::string, std::function<FdTally()>>> suites{
        {"gauss-core", suite_gauss_core},   {"projection", suite_projection},
        {"compositing", suite_compositing}, {"rectifier", suite_rectifier},
        {"losses", suite_losses},           {"binding-chain", suite_binding_chain},
    };
    bool ok = true;
    std::string detail;
    for (const auto& [name, run] : suites) {
        const FdTally t = run();
        // A suite that compares almost nothing proves nothing.
        const bool suite_ok = t.failed == 0 && t.compared > 10 * t.skipped && t.compared > 0;
        ok = ok && suite_ok;
        detail += fmt("%s %zu/%zu ok (worst %.1e, %zu kinks skipped); ", name.c_str(), t.compared - t.failed,
                      t.compared, t.worst, t.skipped);
    }
    const double elapsed = seconds_since(t0);
    ok = ok && elapsed < 300.0;
    return {ok, detail + fmt("10 seeds each, %.1f s", elapsed)};
}

// ---------------------------------------------------------------------------
// 3 and 7. Exact-recovery overfit and run-to-run determinism.

struct FitMetrics {
    double psnr = 0.0;
    double ssim = 0.0;
};

FitMetrics evaluate_split(const Checkpoint& ckpt, const Dataset& ds, const std::string& split) {
    FitMetrics m;
    const auto idx = ds.split_indices(split);
    const RectifierParams* rect = ckpt.rectifier ? &*ckpt.rectifier : nullptr;
    for (const std::size_t i : idx) {
        const FrameRecord& f = ds.manifest.frames[i];
        const Image img = render_model(ckpt.splats, rect, ckpt.mesh, f.pose, f.camera, ckpt.config.raster);
        m.psnr += psnr(img, ds.images[i]);
        m.ssim += ssim(img, ds.images[i]);
    }
    m.psnr /= static_cast<double>(idx.size());
    m.ssim /= static_cast<double>(idx.size());
    return m;
}

TrainConfig overfit_config() {
    TrainConfig cfg;
    cfg.seed = 0;
    cfg.deterministic = true;
    cfg.schedule.total_iters = 5000;
    cfg.schedule.density_control_end = 5000;
    cfg.log_interval = 50;
    return cfg;
}

struct OverfitRun {
    fs::path data;
    fs::path run;
    double seconds = 0.0;
};

const Dataset& overfit_dataset() {
    static const Dataset ds = [] {
        SyntheticRigSpec spec;  // two joints, 20 poses, 128 × 128
        synth_generate(spec, work_root() / "overfit_data");
        return load_dataset(work_root() / "overfit_data" / "manifest.json");
    }();
    return ds;
}

const OverfitRun& overfit_run(int which) {
    static std::map<int, OverfitRun> runs;
    auto it = runs.find(which);
    if (it == runs.end()) {
        OverfitRun r;
        r.run = work_root() / ("overfit_run_" + std::to_string(which));
        const auto t0 = Clock::now();
        train(overfit_config(), overfit_dataset(), r.run);
        r.seconds = seconds_since(t0);
        it = runs.emplace(which, r).first;
    }
    return it->second;
}

Outcome criterion_3() {
    const Dataset& ds = overfit_dataset();
    const OverfitRun& r = overfit_run(0);
    const Checkpoint ckpt = load_checkpoint(r.run / "checkpoint.rmav");
    const FitMetrics m = evaluate_split(ckpt, ds, "train");
    const bool ok = m.psnr >= 35.0 && m.ssim >= 0.97 && ckpt.iteration == 5000;
    return {ok, fmt("mean training PSNR %.2f dB (>= 35), SSIM %.4f (>= 0.97), %zu splats, 5000 iterations in %.0f s",
                    m.psnr, m.ssim, ckpt.splats.size(), r.seconds)};
}

Outcome criterion_7() {
    const OverfitRun& a = overfit_run(0);
    const OverfitRun& b = overfit_run(1);
    const auto ca = read_bytes(a.run / "checkpoint.rmav");
    const auto cb = read_bytes(b.run / "checkpoint.rmav");
    const auto la = read_bytes(a.run / "train_log.csv");
    const auto lb = read_bytes(b.run / "train_log.csv");
    const bool ok = !ca.empty() && !la.empty() && ca == cb && la == lb;
    return {ok, fmt("checkpoints %s (%zu bytes), logs %s (%zu bytes)", ca == cb ? "identical" : "differ", ca.size(),
                    la == lb ? "identical" : "differ", la.size())};
}

// ---------------------------------------------------------------------------
// 4. Rectifier vs rig-only ablation on pose-dependent deformation.

Outcome criterion_4() {
    SyntheticRigSpec spec;
    spec.bulge = kBulge;
    spec.num_poses = 20;
    spec.num_test_poses = 5;
    synth_generate(spec, work_root() / "bulge_data");
    const Dataset ds = load_dataset(work_root() / "bulge_data" / "manifest.json");

    TrainConfig full;
    full.seed = 0;
    full.schedule.total_iters = kBulgeIters;
    full.schedule.density_control_end = kBulgeIters;
    full.log_interval = 100;
    TrainConfig ablation = full;
    ablation.use_rectifier = false;

    const auto t0 = Clock::now();
    train(full, ds, work_root() / "bulge_full");
    train(ablation, ds, work_root() / "bulge_ablation");
    const double elapsed = seconds_since(t0);
    const FitMetrics mf = evaluate_split(load_checkpoint(work_root() / "bulge_full" / "checkpoint.rmav"), ds, "test");
    const FitMetrics ma =
        evaluate_split(load_checkpoint(work_root() / "bulge_ablation" / "checkpoint.rmav"), ds, "test");
    const double gain = mf.psnr - ma.psnr;
    return {gain >= 1.0, fmt("held-out PSNR with rectifier %.2f dB vs without %.2f dB, gain %.2f dB (>= 1.0), "
                             "%d iterations each, %.0f s",
                             mf.psnr, ma.psnr, gain, kBulgeIters, elapsed)};
}

// ---------------------------------------------------------------------------
// 5. Structural invariants over the full default schedule.

Outcome criterion_5() {
    SyntheticRigSpec spec;
    spec.image_size = 24;
    spec.num_poses = 4;
    spec.rings_per_segment = 2;
    spec.radial_segments = 5;
    const SyntheticScene scene = make_synthetic_scene(spec);
    std::vector<TrainFrame> frames;
    for (const Pose& pose : scene.poses) {
        frames.push_back({scene.camera, pose, render_ground_truth(spec, scene, pose), pose_mesh(scene.mesh, pose)});
    }
    TrainConfig cfg;  // default 50000-iteration schedule
    cfg.seed = 5;
    // Unbounded, the splat count grows about 1.5x per densify event on this
    // scene; a budget keeps 50000 iterations within reach of one core.
    cfg.density.max_splats = 200;
    const auto t0 = Clock::now();
    Trainer trainer(cfg, scene.mesh, frames);
    std::size_t bad_quat = 0, bad_opacity = 0, uncovered = 0;
    std::size_t events_seen = 0;
    std::size_t max_splats = 0;
    trainer.run(cfg.schedule.total_iters, [&](const Trainer& t) {
        const SplatSet& s = t.splats();
        max_splats = std::max(max_splats, s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            bad_quat += std::abs(s.rot(i).norm() - 1.0) > 1e-12 ? 1 : 0;
            const double o = s.opacity(i);
            bad_opacity += (o > 0.0 && o < 1.0) ? 0 : 1;
        }
        if (t.events().size() != events_seen) {
            events_seen = t.events().size();
            uncovered += uncovered_faces(s, t.mesh().faces.size());
        }
    });
    std::vector<std::int64_t> densify, resets;
    for (const TrainEvent& e : trainer.events()) {
        (e.kind == TrainEventKind::Densify ? densify : resets).push_back(e.iteration);
    }
    std::vector<std::int64_t> want_densify, want_resets;
    for (std::int64_t it = 500; it < 35000; it += 500) {
        want_densify.push_back(it);
    }
    for (std::int64_t it = 10000; it < 35000; it += 5000) {
        want_resets.push_back(it);
    }
    const bool ok = bad_quat == 0 && bad_opacity == 0 && uncovered == 0 && densify == want_densify &&
                    resets == want_resets && trainer.iteration() == 50000;
    return {ok, fmt("%lld iterations, %zu faces, up to %zu splats; uncovered faces after events: %zu; "
                    "non-unit quaternions: %zu; opacities outside (0,1): %zu; densify events %zu (500..%lld), "
                    "opacity resets %zu (%s); %.0f s",
                    static_cast<long long>(trainer.iteration()), scene.mesh.faces.size(), max_splats, uncovered,
                    bad_quat, bad_opacity, densify.size(), densify.empty() ? 0LL : static_cast<long long>(densify.back()),
                    resets.size(), resets == want_resets ? "10000..30000" : "unexpected", seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// 6. A zero-initialized rectifier is an exact no-op.

Outcome criterion_6() {
    const SyntheticRigSpec spec;
    const SyntheticScene scene = make_synthetic_scene(spec);
    std::vector<TrainFrame> frames;
    for (const Pose& pose : scene.poses) {
        frames.push_back({scene.camera, pose, Image(), pose_mesh(scene.mesh, pose)});
    }
    TrainConfig cfg;
    cfg.seed = 3;
    const Trainer trainer(cfg, scene.mesh, frames);
    std::size_t renders = 0, mismatches = 0;
    // Both the initial model and the ground-truth splats, over every pose.
    for (const SplatSet* splats : {&trainer.splats(), &scene.ground_truth}) {
        for (const TrainFrame& f : frames) {
            const FrameState with =
                render_frame(*splats, trainer.rectifier(), f.posed_vertices, scene.mesh.faces, f.pose, f.camera);
            const FrameState without =
                render_frame(*splats, nullptr, f.posed_vertices, scene.mesh.faces, f.pose, f.camera);
            ++renders;
            if (with.render.color.data != without.render.color.data || with.render.alpha != without.render.alpha) {
                ++mismatches;
            }
        }
    }
    return {mismatches == 0 && trainer.rectifier() != nullptr,
            fmt("%zu of %zu iteration-0 renders bit-identical with and without the rectifier", renders - mismatches,
                renders)};
}

// ---------------------------------------------------------------------------
// 8. Loss-weight fidelity.

Outcome criterion_8() {
    LossTerms ones;
    ones.rgb = ones.ssim = ones.pos = ones.scaling = ones.offset = 1.0;
    ones.lpips = 1.0;
    const LossWeights w;
    const double total = total_loss(ones, w).total;
    return {total == 3.71 && w.lpips == 0.0, fmt("total = %.17g with lpips weight %g", total, w.lpips)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::function<Outcome()>> criteria{
        {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4},
        {5, criterion_5}, {6, criterion_6}, {7, criterion_7}, {8, criterion_8},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    if (selected.empty()) {
        for (const auto& [k, _] : criteria) {
            selected.insert(k);
        }
    }
    int failures = 0;
    for (const int k : selected) {
        const auto it = criteria.find(k);
        if (it == criteria.end()) {
            std::fprintf(stderr, "unknown criterion %d\n", k);
            return 2;
        }
        Outcome o;
        try {
            o = it->second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", k, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    fs::remove_all(work_root());
    return failures == 0 ? 0 : 1;
}
