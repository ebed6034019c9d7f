#include "msplat/pipeline.hpp"

#include <cmath>

#include "msplat/errors.hpp"

namespace msplat {

FrameState render_frame(const SplatSet& splats, const RectifierParams* rectifier, std::span<const Vec3> posed_vertices,
                        std::span<const Face> faces, const Pose& pose, const Camera& camera,
                        const RasterSettings& settings) {
    const std::size_t n = splats.size();
    FrameState st;
    st.frames = face_frames(posed_vertices, faces);
    st.bound.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t f = splats.parent_face[i];
        if (f >= st.frames.size()) {
            throw RigError("splat " + std::to_string(i) + " references face " + std::to_string(f) +
                           " beyond the mesh's " + std::to_string(st.frames.size()));
        }
        st.bound[i] = bind_to_global(splats, i, st.frames[f]);
    }

    st.deltas.assign(kRectifierOutputWidth * n, 0.0);
    st.rectified.resize(n);
    st.rectified_path = rectifier != nullptr;
    if (rectifier) {
        st.pose_vec = pose.body_pose_vector(rectifier->config.pose_dim);
        std::vector<Vec3> mu_star(n);
        for (std::size_t i = 0; i < n; ++i) {
            mu_star[i] = st.bound[i].mu;
        }
        const Eigen::MatrixXd x = build_rectifier_inputs(rectifier->config, mu_star, st.pose_vec);
        const Eigen::MatrixXd out = rectify_forward_batch(*rectifier, x, &st.rect_cache);
        std::copy(out.data(), out.data() + out.size(), st.deltas.begin());
        for (std::size_t i = 0; i < n; ++i) {
            const auto d = RectifierDeltas::from_output({st.deltas.data() + kRectifierOutputWidth * i,
                                                         kRectifierOutputWidth});
            st.rectified[i] = apply_deltas(st.bound[i], d, &st.scale_clamp_events);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            st.rectified[i].mu = st.bound[i].mu;
            st.rectified[i].rot = st.bound[i].rot.normalized();
            st.rectified[i].scale = st.bound[i].scale;
        }
    }

    const Vec3 cam_center = camera.center();
    st.covariances.resize(n);
    st.sh_evals.resize(n);
    st.projected_slot.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const RectifiedGaussian& g = st.rectified[i];
        st.covariances[i] = build_covariance(g.rot, g.scale);
        auto p = project_gaussian(g.mu, st.covariances[i], camera, settings);
        if (!p) {
            continue;
        }
        const Vec3 dir = (g.mu - cam_center).normalized();
        st.sh_evals[i] = sh_evaluate(splats.sh_of(i), splats.sh_degree, dir);
        p->color = st.sh_evals[i].color;
        p->opacity = splats.opacity(i);
        st.projected_slot[i] = static_cast<int>(st.projected.size());
        st.projected_source.push_back(static_cast<std::uint32_t>(i));
        st.projected.push_back(*p);
    }
    st.render = rasterize_forward(st.projected, camera, settings, &st.raster);
    return st;
}

ModelGrads ModelGrads::zeros_like(const SplatSet& splats, const RectifierParams* rectifier) {
    ModelGrads g;
    g.mu_local.assign(splats.mu_local.size(), 0.0);
    g.rot_local.assign(splats.rot_local.size(), 0.0);
    g.log_scale.assign(splats.log_scale.size(), 0.0);
    g.opacity_logit.assign(splats.opacity_logit.size(), 0.0);
    g.sh.assign(splats.sh.size(), 0.0);
    g.rectifier.assign(rectifier ? rectifier->data.size() : 0, 0.0);
    g.view_grad_norm.assign(splats.size(), -1.0);
    return g;
}

ModelGrads backward_frame(const FrameState& st, const SplatSet& splats, const RectifierParams* rectifier,
                          const Camera& camera, const Image& grad_image, std::span<const double> grad_deltas) {
    const std::size_t n = splats.size();
    ModelGrads out = ModelGrads::zeros_like(splats, rectifier);
    const std::vector<SplatGrad2D> g2d = rasterize_backward(st.raster, st.projected, grad_image);
    const Vec3 cam_center = camera.center();
    const std::size_t stride = splats.sh_stride();

    std::vector<Vec3> d_mu_star(n, Vec3::Zero());
    std::vector<Vec4> d_rot_star(n, Vec4::Zero());
    std::vector<Vec3> d_scale_star(n, Vec3::Zero());
    Eigen::MatrixXd d_out;
    if (st.rectified_path) {
        d_out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kRectifierOutputWidth), static_cast<Eigen::Index>(n));
        if (!grad_deltas.empty()) {
            std::copy(grad_deltas.begin(), grad_deltas.end(), d_out.data());
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const RectifiedGaussian& g = st.rectified[i];
        Vec3 d_mu = Vec3::Zero();
        Vec4 d_rot = Vec4::Zero();
        Vec3 d_scale = Vec3::Zero();
        if (st.projected_slot[i] >= 0) {
            const SplatGrad2D& s2 = g2d[static_cast<std::size_t>(st.projected_slot[i])];
            const double sig = splats.opacity(i);
            out.opacity_logit[i] = s2.opacity * sig * (1.0 - sig);

            const Vec3 raw_dir = g.mu - cam_center;
            const double len = raw_dir.norm();
            const Vec3 dir = raw_dir / len;
            const Vec3 d_dir = sh_backward(splats.sh_of(i), splats.sh_degree, dir, st.sh_evals[i], s2.color,
                                           {out.sh.data() + i * stride, stride});
            d_mu += (d_dir - dir * dir.dot(d_dir)) / len;

            const ProjectionGrad pg = project_gaussian_backward(g.mu, st.covariances[i], camera, s2.mean2d, s2.cov2d);
            d_mu += pg.d_mu;
            const CovarianceGrad cg = build_covariance_backward(g.rot, g.scale, pg.d_sigma);
            d_rot = cg.d_rot;
            d_scale = cg.d_scale;

            const Vec2 ndc(s2.mean2d.x() * 0.5 * camera.width, s2.mean2d.y() * 0.5 * camera.height);
            out.view_grad_norm[i] = ndc.norm();
        }
        if (st.rectified_path) {
            const auto deltas =
                RectifierDeltas::from_output({st.deltas.data() + kRectifierOutputWidth * i, kRectifierOutputWidth});
            const ApplyDeltasGrad ag = apply_deltas_backward(st.bound[i], deltas, g, d_mu, d_rot, d_scale);
            d_mu_star[i] = ag.d_mu_star;
            d_rot_star[i] = ag.d_rot_star;
            d_scale_star[i] = ag.d_scale_star;
            auto col = d_out.col(static_cast<Eigen::Index>(i));
            col.segment<3>(0) += ag.d_deltas.d_mu;
            col.segment<4>(3) += ag.d_deltas.d_rot;
            col.segment<3>(7) += ag.d_deltas.d_scale;
        } else {
            d_mu_star[i] = d_mu;
            d_rot_star[i] = quat_normalize_backward(st.bound[i].rot, d_rot);
            d_scale_star[i] = d_scale;
        }
    }

    if (st.rectified_path) {
        const RectifierGrads rg = rectify_backward(*rectifier, st.rect_cache, d_out);
        out.rectifier = rg.params;
        const std::size_t enc = rectifier->config.encoder.output_dim();
        for (std::size_t i = 0; i < n; ++i) {
            d_mu_star[i] += positional_encode_backward(st.bound[i].mu, rectifier->config.encoder,
                                                       {rg.inputs.col(static_cast<Eigen::Index>(i)).data(), enc});
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const TriangleFrame& f = st.frames[splats.parent_face[i]];
        const Vec3 d_local = f.scale * (f.rotation.transpose() * d_mu_star[i]);
        const Quaternion q_frame = Quaternion::from_matrix(f.rotation);
        const Vec4 d_rot_unit = left_mult_matrix(q_frame).transpose() * d_rot_star[i];
        const Vec4 d_rot_raw = quat_normalize_backward(splats.rot(i), d_rot_unit);
        const Vec3 s = splats.scale(i);
        for (int k = 0; k < 3; ++k) {
            out.mu_local[3 * i + k] = d_local[k];
            out.log_scale[3 * i + k] = d_scale_star[i][k] * f.scale * s[k];
        }
        for (int k = 0; k < 4; ++k) {
            out.rot_local[4 * i + k] = d_rot_raw[k];
        }
    }
    return out;
}

std::vector<WorldSplat> world_splats(const FrameState& state) {
    std::vector<WorldSplat> out(state.rectified.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = {state.rectified[i].mu, state.rectified[i].rot, state.rectified[i].scale};
    }
    return out;
}

}  // namespace msplat
