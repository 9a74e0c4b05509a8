// Randomized invariants over many small instances.

#include "support.hpp"

#include <cmif/align.hpp>
#include <cmif/cmif.hpp>
#include <cmif/oracle.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace cmif;

namespace {

IntensityImage random_intensity(std::mt19937_64& rng, GridShape s) {
    std::uniform_int_distribution<int> d(0, 5);
    std::vector<double> v(s.size());
    for (auto& x : v) x = d(rng);
    return IntensityImage(s, 1, std::move(v));
}

AlignmentConfig tiny_config(double gamma) {
    AlignmentConfig c;
    c.gamma = gamma;
    c.kmeans = {8, 50, 5, 0};
    return c;
}

}  // namespace

TEST(Properties, MiBoundedByMarginalEntropies) {
    std::mt19937_64 rng(81);
    for (int t = 0; t < 100; ++t) {
        const auto a = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 12), 1 + t % 5);
        const auto b = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 12), 1 + t % 4);
        const auto ma = fixtures::random_mask(rng, a.shape()), mb = fixtures::random_mask(rng, b.shape());
        CmifOptions opt;
        opt.keep_entropies = true;
        const auto r = cmif_compute(a, ma, b, mb, opt);
        const auto& e = *r.entropies;
        for (std::size_t i = 0; i < r.map.mi.size(); ++i) {
            if (!r.map.valid[i]) continue;
            ASSERT_GE(r.map.mi[i], -1e-12);
            ASSERT_LE(r.map.mi[i], std::min(e.h_a[i], e.h_b[i]) + 1e-12);
            ASSERT_LE(e.h_a[i], std::log2(a.k()) + 1e-12);
            ASSERT_LE(e.h_b[i], std::log2(b.k()) + 1e-12);
            ASSERT_LE(std::max(e.h_a[i], e.h_b[i]), e.h_ab[i] + 1e-12);
            ASSERT_LE(e.h_ab[i], e.h_a[i] + e.h_b[i] + 1e-12);
        }
    }
}

TEST(Properties, LabelPermutationInvariance) {
    std::mt19937_64 rng(82);
    for (int t = 0; t < 100; ++t) {
        const int ka = 2 + t % 4, kb = 2 + (t / 4) % 4;
        const auto a = fixtures::random_labels(rng, fixtures::random_shape(rng, 2, 12), ka);
        const auto b = fixtures::random_labels(rng, fixtures::random_shape(rng, 2, 12), kb);
        const auto ma = fixtures::random_mask(rng, a.shape()), mb = fixtures::random_mask(rng, b.shape());
        std::vector<int> pa(static_cast<std::size_t>(ka)), pb(static_cast<std::size_t>(kb));
        std::iota(pa.begin(), pa.end(), 0);
        std::iota(pb.begin(), pb.end(), 0);
        std::shuffle(pa.begin(), pa.end(), rng);
        std::shuffle(pb.begin(), pb.end(), rng);
        const auto m1 = cmif_map(a, ma, b, mb);
        const auto m2 = cmif_map(fixtures::relabel(a, pa), ma, fixtures::relabel(b, pb), mb);
        ASSERT_EQ(m1.valid, m2.valid);
        for (std::size_t i = 0; i < m1.mi.size(); ++i) ASSERT_NEAR(m1.mi[i], m2.mi[i], 1e-12);
    }
}

TEST(Properties, MarginalConsistency) {
    std::mt19937_64 rng(83);
    for (int t = 0; t < 100; ++t) {
        const auto a = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 10), 1 + t % 4);
        const auto b = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 10), 1 + t % 3);
        const auto ma = fixtures::random_mask(rng, a.shape()), mb = fixtures::random_mask(rng, b.shape());
        const auto marg = marginal_count_maps(a, ma, b, mb);
        const auto joint = joint_count_maps(a, ma, b, mb);
        const auto n = overlap_map(ma, mb);
        for (std::size_t i = 0; i < n.counts.size(); ++i) {
            std::uint32_t sa = 0, sb = 0, sj = 0;
            for (const auto& m : marg.a) sa += m.counts[i];
            for (const auto& m : marg.b) sb += m.counts[i];
            for (const auto& m : joint.maps) sj += m.counts[i];
            ASSERT_EQ(sa, n.counts[i]);
            ASSERT_EQ(sb, n.counts[i]);
            ASSERT_EQ(sj, n.counts[i]);
        }
    }
}

TEST(Properties, GateMonotonicity) {
    std::mt19937_64 rng(84);
    for (int t = 0; t < 100; ++t) {
        const auto a = fixtures::random_labels(rng, fixtures::random_shape(rng, 2, 10), 3);
        const auto b = fixtures::random_labels(rng, fixtures::random_shape(rng, 2, 10), 3);
        const auto ma = fixtures::random_mask(rng, a.shape()), mb = fixtures::random_mask(rng, b.shape());
        const auto map = cmif_map(a, ma, b, mb);
        if (std::none_of(map.valid.data().begin(), map.valid.data().end(), [](auto v) { return v != 0; })) continue;
        double prev = 1e300;
        for (double g : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) {
            const double mi = gated_argmax(map, g).mi;
            ASSERT_LE(mi, prev);
            prev = mi;
        }
    }
}

TEST(Properties, TransformSetMonotonicity) {
    std::mt19937_64 rng(85);
    for (int t = 0; t < 10; ++t) {
        const GridShape s{20, 20};
        const auto a = random_intensity(rng, s), b = random_intensity(rng, s);
        const Mask m({20, 20});
        const auto prepared = prepare_alignment(a, m, b, m, tiny_config(0.5));
        auto transforms = make_angle_grid(3, grid_center(s));
        double prev = align_prepared(prepared, transforms).mi;
        for (double extra : {0.3, 1.1, -2.0}) {
            transforms.push_back(RigidTransform::rotation(extra, grid_center(s)));
            const double mi = align_prepared(prepared, transforms).mi;
            ASSERT_GE(mi, prev);
            prev = mi;
        }
    }
}

TEST(Properties, DeterminismUnderFixedSeeds) {
    std::mt19937_64 rng(86);
    for (int t = 0; t < 100; ++t) {
        const auto a = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 10), 1 + t % 5);
        const auto b = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 10), 1 + t % 3);
        const auto ma = fixtures::random_mask(rng, a.shape()), mb = fixtures::random_mask(rng, b.shape());
        const auto m1 = cmif_map(a, ma, b, mb), m2 = cmif_map(a, ma, b, mb);
        ASSERT_EQ(m1.n, m2.n);
        ASSERT_EQ(m1.mi, m2.mi);
    }
}

TEST(Properties, EquivalenceWithDirectMethod) {
    std::mt19937_64 rng(87);
    for (int t = 0; t < 50; ++t) {
        const auto a = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 16), 1 + t % 8);
        const auto b = fixtures::random_labels(rng, fixtures::random_shape(rng, 1, 16), 1 + (t * 3) % 8);
        const auto ma = fixtures::random_mask(rng, a.shape()), mb = fixtures::random_mask(rng, b.shape());
        const auto fast = cmif_map(a, ma, b, mb);
        const auto slow = oracle::direct_cmif_map(a, ma, b, mb, false).map;
        ASSERT_EQ(fast.n, slow.n);
        ASSERT_EQ(fast.valid, slow.valid);
        for (std::size_t i = 0; i < fast.mi.size(); ++i) ASSERT_NEAR(fast.mi[i], slow.mi[i], 1e-10);
    }
}
