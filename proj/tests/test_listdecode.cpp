#include "ldgauss/datagen.hpp"
#include "ldgauss/listdecode.hpp"
#include "ldgauss/oracle.hpp"

#include <gtest/gtest.h>

using namespace ldgauss;

TEST(NaiveClustering, SingleTightCloudIsOneSubset) {
    const PointSet T = sample_gaussian(Vector::Zero(5), 1.0, 2000, 3);
    const auto subsets = naive_clustering(T, 0.4, 10.0);
    ASSERT_EQ(subsets.size(), 1u);
    EXPECT_EQ(subsets[0].size(), T.size());
}

TEST(NaiveClustering, TwoFarCloudsSeparate) {
    const int n = 4;
    const double R = 2.0 * 10.0 * std::sqrt(static_cast<double>(n));
    Vector far = Vector::Zero(n);
    far[0] = 100.0 * R;
    GmmModel model;
    model.components.push_back({0.5, Vector::Zero(n), 1.0});
    model.components.push_back({0.5, far, 1.0});
    const auto sample = sample_gmm(model, 100, 7);
    const auto subsets = naive_clustering(sample.points, 0.4, 10.0);
    ASSERT_EQ(subsets.size(), 2u);
    for (const auto& s : subsets) {
        // Each subset is one full cluster.
        std::int64_t low = 0;
        for (std::int64_t i = 0; i < s.size(); ++i)
            if (s.point(i)[0] < 50.0 * R) ++low;
        EXPECT_TRUE(low == 0 || low == s.size());
        EXPECT_NEAR(static_cast<double>(s.size()), 50.0, 25.0);
    }
}

TEST(NaiveClustering, SubsetCountNeverExceedsInverseAlpha) {
    RngStream rng(11, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const double alpha = 0.08 + 0.4 * rng.u01();
        const int n = 3;
        const int clusters = 1 + static_cast<int>(rng.uniform_index(6));
        GmmModel model;
        for (int c = 0; c < clusters; ++c) {
            Vector mu = Vector::Zero(n);
            mu[0] = 500.0 * c;
            model.components.push_back({1.0 / clusters, mu, 1.0});
        }
        const auto sample = sample_gmm(model, 600, 100 + trial);
        const auto subsets = naive_clustering(sample.points, alpha, 10.0);
        EXPECT_LE(static_cast<double>(subsets.size()), 1.0 / alpha + 1e-12);
    }
}

TEST(ListReduction, DuplicateHypothesesCollapse) {
    const PointSet T = sample_gaussian(Vector::Zero(3), 1.0, 2000, 13);
    HypothesisList M;
    Vector h = Vector::Ones(3) * 0.01;
    for (int i = 0; i < 5; ++i) M.push(h + Vector::Constant(3, 1e-9 * i), "h" + std::to_string(i));
    const auto defs = list_reduction_defaults(0.4, 1, 10.0);
    const auto out = list_reduction(M, T, 0.4, defs.beta, defs.delta, defs.t);
    EXPECT_EQ(out.size(), 1);
}

TEST(ListReduction, KeepsAHypothesisNearTruth) {
    const int n = 5;
    Vector mu = Vector::Ones(n);
    const PointSet T = sample_gaussian(mu, 1.0, 10000, 17);
    HypothesisList M;
    M.push(mu, "true");
    Vector junk = Vector::Zero(n);
    junk[0] = 500.0;
    M.push(junk, "junk");
    const auto defs = list_reduction_defaults(0.3, 1, 10.0);
    const auto out = list_reduction(M, T, 0.3, defs.beta, defs.delta, defs.t);
    ASSERT_GE(out.size(), 1);
    double best = 1e300;
    for (const auto& h : out.means) best = std::min(best, (h - mu).norm());
    EXPECT_LE(best, 3.0 * (defs.beta + defs.t));
    // The junk hypothesis has no sample support and is dropped.
    for (const auto& h : out.means) EXPECT_LT(h[0], 100.0);
}

TEST(ListReduction, OutputLengthBound) {
    // |M'| <= (1/alpha)(1 + delta |M| C'') and, with the delta cap, the
    // stronger ceil(1.5/alpha) used by the pipeline.
    RngStream rng(23, 0);
    const int n = 4;
    const PointSet T = sample_gaussian(Vector::Zero(n), 1.0, 4000, 19);
    for (double alpha : {0.1, 0.25, 0.45}) {
        HypothesisList M;
        for (int i = 0; i < 40; ++i) {
            Vector h(n);
            for (int j = 0; j < n; ++j) h[j] = 30.0 * rng.gaussian();
            M.push(h, "r" + std::to_string(i));
        }
        const auto defs = list_reduction_defaults(alpha, 1, 10.0);
        const auto out = list_reduction(M, T, alpha, defs.beta, defs.delta, defs.t);
        EXPECT_LE(static_cast<double>(out.size()),
                  (1.0 / alpha) * (1.0 + 0.5 * 4.0) + 1e-9);
        EXPECT_LE(static_cast<double>(out.size()), std::ceil(1.5 / alpha) + 1e-9);
        const double delta_eff = std::min(defs.delta, 1.0 / (3.0 * M.size()));
        EXPECT_LE(static_cast<double>(out.size()),
                  (1.0 / alpha) * (1.0 + 4.0 * delta_eff * static_cast<double>(M.size())) + 1e-9);
    }
}

TEST(ListDecode, CleanDataYieldsOneAccurateHypothesis) {
    const int n = 5;
    Vector mu(n);
    mu << 1.0, -2.0, 0.5, 3.0, -1.0;
    const PointSet T = sample_gaussian(mu, 1.0, 10000, 29);
    DecodeParams dp;
    dp.rng_seed = 5;
    const auto res = list_decode_gaussian(T, 0.45, 1, 0.01, dp);
    ASSERT_GE(res.hypotheses.size(), 1);
    EXPECT_LE(oracle::best_error(res.hypotheses, mu), 0.5);
}

TEST(ListDecode, WorklistWatermarkStaysBounded) {
    const int n = 6;
    Vector far = Vector::Zero(n);
    far[0] = 60.0;
    GmmModel model;
    model.components.push_back({0.3, Vector::Zero(n), 1.0});
    model.components.push_back({0.4, far, 1.0});
    Vector far2 = Vector::Zero(n);
    far2[1] = -45.0;
    model.components.push_back({0.3, far2, 1.0});
    const auto sample = sample_gmm(model, 9000, 31);
    DecodeParams dp;
    dp.rng_seed = 6;
    const auto res = list_decode_gaussian(sample.points, 0.25, 1, 0.01, dp);
    EXPECT_LE(static_cast<double>(res.trace.max_worklist), 4.0 / ipow(0.25, 3));
    EXPECT_GE(res.hypotheses.size(), 3);  // one per component
    for (const auto& c : model.components) {
        double best = 1e300;
        for (const auto& h : res.hypotheses.means) best = std::min(best, (h - c.mean).norm());
        EXPECT_LE(best, 1.0) << "component not recovered";
    }
}

TEST(ListDecode, DeterministicUnderFixedSeed) {
    const int n = 4;
    Vector far = Vector::Zero(n);
    far[0] = 25.0;
    const PointSet clean = sample_gaussian(Vector::Zero(n), 1.0, 3000, 37);
    const auto corrupted = corrupt(clean, 0.3, FarCluster{far, 3.0}, 38);
    DecodeParams dp;
    dp.rng_seed = 123;
    const auto a = list_decode_gaussian(corrupted.points, 0.3, 1, 0.01, dp);
    const auto b = list_decode_gaussian(corrupted.points, 0.3, 1, 0.01, dp);
    ASSERT_EQ(a.hypotheses.size(), b.hypotheses.size());
    for (std::int64_t i = 0; i < a.hypotheses.size(); ++i) {
        ASSERT_EQ(a.hypotheses.provenance[static_cast<std::size_t>(i)],
                  b.hypotheses.provenance[static_cast<std::size_t>(i)]);
        ASSERT_EQ((a.hypotheses.means[static_cast<std::size_t>(i)] -
                   b.hypotheses.means[static_cast<std::size_t>(i)])
                      .norm(),
                  0.0);
    }
    EXPECT_EQ(a.trace.subroutine_calls, b.trace.subroutine_calls);
}

TEST(ListDecode, RejectsBadArguments) {
    const PointSet T = sample_gaussian(Vector::Zero(2), 1.0, 100, 41);
    EXPECT_THROW(list_decode_gaussian(T, 0.6, 1, 0.01), precondition_error);
    EXPECT_THROW(list_decode_gaussian(T, 0.45, 1, 0.01), precondition_error);  // too small vs floor
}

TEST(ListDecode, ResourceCapSurfaces) {
    const int n = 3;
    const PointSet T = sample_gaussian(Vector::Zero(n), 1.0, 5000, 43);
    DecodeParams dp;
    dp.max_subroutine_calls = 0;
    EXPECT_THROW(list_decode_gaussian(T, 0.4, 1, 0.01, dp), resource_cap_error);
}
