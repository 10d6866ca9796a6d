#include "ldgauss/multifilter.hpp"
#include "ldgauss/datagen.hpp"

#include <gtest/gtest.h>

using namespace ldgauss;

namespace {

// pval-level tests only need the candidate for its size and dimension.
CandidateSet dummy_candidate(std::int64_t m, double alpha, int n = 25) {
    CandidateSet c;
    c.points = PointSet::own(Matrix::Zero(m, n));
    c.alpha = alpha;
    return c;
}

double potential(const MultifilterOutcome& out) {
    double s = 0.0;
    for (const auto& p : out.parts) s += 1.0 / sq(p.alpha);
    return s;
}

}  // namespace

TEST(BasicMultifilter, ZeroVarianceIsYes) {
    const auto T = dummy_candidate(200, 0.5);
    std::vector<double> pvals(200, 0.0);
    FilterParams params;
    params.d = 1;
    const auto out = basic_multifilter(pvals, T, params);
    EXPECT_EQ(out.kind, MultifilterOutcome::Kind::Yes);
}

TEST(BasicMultifilter, FarBimodalSplitsIntoFullClusters) {
    // Two clusters separated by 10 L: no short interval covers 75%, so the
    // two-sided threshold branch must fire and keep each cluster whole.
    const double alpha = 0.5;
    FilterParams params;
    params.d = 1;
    const auto th = detail::thresholds(params.C, params.d, alpha, 25);
    const double gap = 10.0 * th.L;
    std::vector<double> pvals;
    for (int i = 0; i < 100; ++i) pvals.push_back(0.0);
    for (int i = 0; i < 100; ++i) pvals.push_back(gap);
    const auto T = dummy_candidate(200, alpha);
    const auto out = basic_multifilter(pvals, T, params);
    ASSERT_EQ(out.kind, MultifilterOutcome::Kind::Split);
    ASSERT_EQ(out.parts.size(), 2u);
    EXPECT_EQ(out.parts[0].points.size(), 100);
    EXPECT_EQ(out.parts[1].points.size(), 100);
    // One part holds the high cluster, the other the low cluster.
    EXPECT_GE(out.parts[0].points.root_index(0), 100);
    EXPECT_LT(out.parts[1].points.root_index(0), 100);
    EXPECT_LE(potential(out), 1.0 / sq(alpha) + 1e-12);
    EXPECT_LE(potential(out), 4.0 + 1e-12);

    // Independent check of the split condition: enumerate thresholds
    // t = median + 2 m R and verify the returned part sizes arise from a
    // threshold satisfying the intersection bound directly.
    std::vector<double> sorted(pvals);
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[99];
    bool matched = false;
    for (int mi = -64; mi <= 64; ++mi) {
        const double t = med + 2.0 * mi * th.R;
        std::int64_t hi = 0, lo = 0;
        for (double p : pvals) {
            if (p > t - th.R) ++hi;
            if (p < t + th.R) ++lo;
        }
        const double m2 = 200.0 * 200.0;
        if (static_cast<double>(hi * hi + lo * lo) <= m2 * sq(1.0 - sq(alpha) / 100.0) &&
            200.0 - std::max(hi, lo) >= alpha * 200.0 / 4.0) {
            if ((hi == out.parts[0].points.size() && lo == out.parts[1].points.size()))
                matched = true;
        }
    }
    EXPECT_TRUE(matched);
}

TEST(BasicMultifilter, HugeRangeIsNo) {
    FilterParams params;
    params.d = 1;
    const auto T = dummy_candidate(100, 0.5, 4);
    std::vector<double> pvals(100, 0.0);
    pvals[7] = 1e6;
    const auto out = basic_multifilter(pvals, T, params);
    EXPECT_EQ(out.kind, MultifilterOutcome::Kind::No);
}

TEST(BasicMultifilter, TailRemovalSingletonRaisesAlpha) {
    // A 95% spike plus a moderate far tail: interval found, variance too
    // large, tail threshold removes the outliers. Singleton splits must not
    // lose alpha and must shrink.
    const double alpha = 0.5;
    FilterParams params;
    params.d = 1;
    std::vector<double> pvals(190, 0.0);
    for (int i = 0; i < 10; ++i) pvals.push_back(50.0);
    const auto T = dummy_candidate(200, alpha, 40);
    const auto out = basic_multifilter(pvals, T, params);
    ASSERT_EQ(out.kind, MultifilterOutcome::Kind::Split);
    ASSERT_EQ(out.parts.size(), 1u);
    EXPECT_EQ(out.parts[0].points.size(), 190);
    EXPECT_GE(out.parts[0].alpha, alpha);
    EXPECT_LE(potential(out), 1.0 / sq(alpha) + 1e-12);
}

TEST(BasicMultifilter, GaussianDataIsYesAcrossAlpha) {
    RngStream rng(3, 0);
    for (double alpha : {0.1, 0.3, 0.5, 0.9, 1.0}) {
        std::vector<double> pvals(5000);
        for (auto& p : pvals) p = rng.gaussian();
        const auto T = dummy_candidate(5000, alpha, 10);
        FilterParams params;
        params.d = 1;
        const auto out = basic_multifilter(pvals, T, params);
        EXPECT_EQ(out.kind, MultifilterOutcome::Kind::Yes) << "alpha=" << alpha;
    }
}

// Randomized adversarial configurations; every Split must satisfy the
// multifilter arithmetic (checked again here independently of make_split).
TEST(BasicMultifilter, FuzzInvariants) {
    RngStream rng(17, 0);
    int splits = 0, yes = 0, no = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const double alpha = 0.05 + 0.9 * rng.u01();
        const int clusters = 1 + static_cast<int>(rng.uniform_index(3));
        const std::int64_t m = 200 + static_cast<std::int64_t>(rng.uniform_index(800));
        std::vector<double> pvals;
        std::vector<double> centers;
        for (int c = 0; c < clusters; ++c) centers.push_back(40.0 * (rng.u01() - 0.5));
        for (std::int64_t i = 0; i < m; ++i) {
            const auto c = rng.uniform_index(static_cast<std::uint64_t>(clusters));
            const double width = 0.2 + 3.0 * rng.u01();
            pvals.push_back(centers[c] + width * rng.gaussian());
        }
        const auto T = dummy_candidate(m, alpha, 30);
        FilterParams params;
        params.d = 1 + static_cast<int>(rng.uniform_index(2));
        const auto out = basic_multifilter(pvals, T, params);
        switch (out.kind) {
            case MultifilterOutcome::Kind::Split: {
                ++splits;
                ASSERT_GE(out.parts.size(), 1u);
                ASSERT_LE(out.parts.size(), 2u);
                EXPECT_LE(potential(out), 1.0 / sq(alpha) * (1.0 + 1e-12));
                for (const auto& part : out.parts) {
                    EXPECT_GT(part.alpha, 0.0);
                    EXPECT_LE(part.alpha, 1.0);
                    EXPECT_LT(part.points.size(), m);
                }
                if (out.parts.size() == 1) EXPECT_GE(out.parts[0].alpha, alpha);
                if (out.parts.size() == 2)
                    for (const auto& part : out.parts)
                        EXPECT_GE(static_cast<double>(m - part.points.size()),
                                  alpha * static_cast<double>(m) / 4.0 - 1e-9);
                break;
            }
            case MultifilterOutcome::Kind::Yes:
                ++yes;
                break;
            case MultifilterOutcome::Kind::No:
                ++no;
                break;
            default:
                FAIL() << "unexpected outcome kind";
        }
    }
    // The fuzz mix should exercise all three outcomes.
    EXPECT_GT(splits, 10);
    EXPECT_GT(yes, 10);
}
