#include <doctest.h>

#include <random>

#include "msplat/density.hpp"
#include "msplat/errors.hpp"
#include "test_util.hpp"

using namespace msplat;

namespace {

GaussianSplat make_splat(std::uint32_t face, double opacity, double log_scale = 0.0) {
    GaussianSplat g;
    g.parent_face = face;
    g.opacity_logit = logit(opacity);
    g.log_scale = Vec3::Constant(log_scale);
    g.sh_coeffs.assign(3 * sh_basis_count(1), 0.1);
    return g;
}

SplatSet make_set(const std::vector<GaussianSplat>& splats) {
    SplatSet s;
    s.sh_degree = 1;
    for (const auto& g : splats) {
        s.push_back(g);
    }
    return s;
}

DensityStats stats_with(std::vector<double> means) {
    DensityStats st;
    st.reset(means.size());
    st.accumulate(means);
    return st;
}

}  // namespace

TEST_CASE("density stats average over visible iterations only") {
    DensityStats st;
    st.reset(3);
    st.accumulate(std::vector<double>{1.0, -1.0, 0.5});
    st.accumulate(std::vector<double>{3.0, -1.0, -1.0});
    CHECK(st.mean(0) == 2.0);
    CHECK(st.mean(1) == 0.0);
    CHECK(st.mean(2) == 0.5);
    CHECK(st.visible_count == std::vector<std::uint32_t>{2, 0, 1});
}

TEST_CASE("quiescent splats are left alone") {
    const SplatSet s = make_set({make_splat(0, 0.5), make_splat(1, 0.7), make_splat(1, 0.3)});
    std::mt19937_64 rng(1);
    const std::vector<double> face_scales{1.0, 1.0};
    const auto r = densify_and_prune(s, stats_with({0.0, 1e-5, 1e-4}), {}, face_scales, 0.5, rng);
    CHECK(r.splats == s);
    CHECK(r.cloned == 0);
    CHECK(r.split == 0);
    CHECK(r.pruned == 0);
    REQUIRE(r.source.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r.source[i] == i);
    }
}

TEST_CASE("clone duplicates small splats with fresh moments") {
    // World scale 0.1 × e^0 = 0.1 is below the threshold 0.5, so clone.
    const SplatSet s = make_set({make_splat(0, 0.5), make_splat(1, 0.5)});
    std::mt19937_64 rng(1);
    const std::vector<double> face_scales{0.1, 0.1};
    const auto r = densify_and_prune(s, stats_with({1e-3, 0.0}), {}, face_scales, 0.5, rng);
    CHECK(r.cloned == 1);
    CHECK(r.split == 0);
    REQUIRE(r.splats.size() == 3);
    CHECK(r.splats.get(2).mu_local == s.get(0).mu_local);
    CHECK(r.splats.parent_face[2] == 0);
    CHECK(r.source[0] == 0u);
    CHECK(r.source[1] == 1u);
    CHECK_FALSE(r.source[2].has_value());
}

TEST_CASE("split replaces a large splat by two children on the same face") {
    const SplatSet s = make_set({make_splat(0, 0.5, std::log(2.0)), make_splat(1, 0.5)});
    std::mt19937_64 rng(9);
    const std::vector<double> face_scales{1.0, 1.0};
    const DensityControlConfig cfg;
    const auto r = densify_and_prune(s, stats_with({1e-3, 0.0}), cfg, face_scales, 0.5, rng);
    CHECK(r.split == 1);
    REQUIRE(r.splats.size() == s.size() + 1);
    // Survivor keeps its row and moments; children are appended.
    CHECK(r.splats.get(0).parent_face == 1);
    CHECK(r.source[0] == 1u);
    for (std::size_t c = 1; c <= 2; ++c) {
        CHECK(r.splats.parent_face[c] == 0);
        CHECK_FALSE(r.source[c].has_value());
        for (int k = 0; k < 3; ++k) {
            CHECK(r.splats.scale(c)[k] == doctest::Approx(2.0 / cfg.split_divisor));
        }
        CHECK(r.splats.opacity(c) == doctest::Approx(0.5));
    }
    CHECK(r.splats.mu(1) != r.splats.mu(2));
}

TEST_CASE("splat budget stops growth in index order") {
    const SplatSet s = make_set({make_splat(0, 0.5), make_splat(1, 0.5), make_splat(1, 0.5)});
    std::mt19937_64 rng(1);
    const std::vector<double> face_scales{0.1, 0.1};
    DensityControlConfig cfg;
    cfg.max_splats = 4;
    const auto r = densify_and_prune(s, stats_with({1e-3, 1e-3, 1e-3}), cfg, face_scales, 0.5, rng);
    CHECK(r.cloned == 1);
    REQUIRE(r.splats.size() == 4);
    CHECK(r.splats.get(3).mu_local == s.get(0).mu_local);

    cfg.max_splats = 3;
    const auto full = densify_and_prune(s, stats_with({1e-3, 1e-3, 1e-3}), cfg, face_scales, 0.5, rng);
    CHECK(full.cloned == 0);
    CHECK(full.splats.size() == 3);
}

TEST_CASE("pruning never removes the last splat of a face") {
    const SplatSet s = make_set({make_splat(0, 0.001), make_splat(1, 0.001), make_splat(1, 0.002), make_splat(1, 0.9)});
    std::mt19937_64 rng(1);
    const std::vector<double> face_scales{1.0, 1.0};
    const auto r = densify_and_prune(s, stats_with({0, 0, 0, 0}), {}, face_scales, 0.5, rng);
    CHECK(r.pruned == 2);
    REQUIRE(r.splats.size() == 2);
    CHECK(r.splats.parent_face[0] == 0);
    CHECK(r.splats.opacity(1) == doctest::Approx(0.9));
    CHECK(uncovered_faces(r.splats, 2) == 0);
}

TEST_CASE("density events keep every face covered (property)") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::uint32_t faces = 1 + static_cast<std::uint32_t>(trial % 7);
        std::vector<GaussianSplat> splats;
        for (std::uint32_t f = 0; f < faces; ++f) {
            const int count = 1 + static_cast<int>(u(rng) * 4);
            for (int k = 0; k < count; ++k) {
                splats.push_back(make_splat(f, u(rng) < 0.5 ? 1e-3 : 0.01 + 0.98 * u(rng), u(rng) * 2 - 1));
            }
        }
        SplatSet s = make_set(splats);
        std::vector<double> means;
        for (std::size_t i = 0; i < s.size(); ++i) {
            means.push_back(u(rng) < 0.3 ? 1e-3 : 0.0);
        }
        std::vector<double> face_scales(faces);
        for (double& fs : face_scales) {
            fs = 0.2 + u(rng);
        }
        const auto r = densify_and_prune(s, stats_with(means), {}, face_scales, 0.5, rng);
        CHECK(uncovered_faces(r.splats, faces) == 0);
        CHECK(r.splats.size() == s.size() + r.cloned + r.split - r.pruned);
        CHECK(r.source.size() == r.splats.size());
        for (std::size_t i = 0; i < r.splats.size(); ++i) {
            CHECK(r.splats.parent_face[i] < faces);
        }
    }
}

TEST_CASE("opacity reset caps at the ceiling") {
    SplatSet s = make_set({make_splat(0, 0.9), make_splat(0, 0.005), make_splat(0, 0.01)});
    const double below = s.opacity_logit[1];
    opacity_reset(s, 0.01);
    CHECK(s.opacity(0) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(s.opacity_logit[1] == below);
    CHECK(s.opacity(2) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("density config validation") {
    DensityControlConfig c;
    CHECK_NOTHROW(c.validate());
    c.prune_opacity = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
