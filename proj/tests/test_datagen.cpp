#include "ldgauss/datagen.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace ldgauss;

TEST(SampleGaussian, MomentsAndDeterminism) {
    Vector mu(1);
    mu << 0.0;
    const PointSet a = sample_gaussian(mu, 1.0, 100000, 42);
    double s1 = 0.0, s2 = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        s1 += a.row(i)[0];
        s2 += sq(a.row(i)[0]);
    }
    const double mean = s1 / static_cast<double>(a.size());
    EXPECT_NEAR(mean, 0.0, 0.02);
    EXPECT_NEAR(s2 / static_cast<double>(a.size()) - sq(mean), 1.0, 0.05);

    const PointSet b = sample_gaussian(mu, 1.0, 100000, 42);
    for (std::int64_t i = 0; i < 100; ++i) ASSERT_EQ(a.row(i)[0], b.row(i)[0]);
}

TEST(SampleGaussian, RejectsBadSigma) {
    Vector mu(2);
    mu << 0.0, 0.0;
    EXPECT_THROW(sample_gaussian(mu, 0.0, 10, 1), precondition_error);
}

TEST(SampleGmm, LabelFractionsMatchWeights) {
    GmmModel model;
    Vector m0 = Vector::Zero(2), m1 = Vector::Zero(2);
    m1[0] = 5.0;
    model.components.push_back({0.3, m0, 1.0});
    model.components.push_back({0.7, m1, 1.0});
    const auto s = sample_gmm(model, 100000, 7);
    std::int64_t c0 = 0;
    for (int l : s.labels)
        if (l == 0) ++c0;
    EXPECT_NEAR(static_cast<double>(c0) / 100000.0, 0.3, 0.01);
}

TEST(SampleGmm, DegenerateWeightIsAllOneComponent) {
    GmmModel model;
    model.components.push_back({1.0, Vector::Zero(2), 1.0});
    model.components.push_back({0.0, Vector::Ones(2), 1.0});
    const auto s = sample_gmm(model, 1000, 3);
    for (int l : s.labels) ASSERT_EQ(l, 0);
}

TEST(Corrupt, AlphaOneIsIdentity) {
    const PointSet clean = sample_gaussian(Vector::Zero(3), 1.0, 500, 1);
    const auto c = corrupt(clean, 1.0, UniformBox{10.0}, 2);
    EXPECT_EQ(c.points.size(), 500);
    for (auto b : c.clean_mask) EXPECT_EQ(b, 1);
}

TEST(Corrupt, FarClusterGeometryAndCounts) {
    const int n = 4;
    Vector offset = Vector::Zero(n);
    offset[0] = 100.0;
    const PointSet clean = sample_gaussian(Vector::Zero(n), 1.0, 1000, 5);
    const auto c = corrupt(clean, 0.25, FarCluster{offset, 2.0}, 6);
    EXPECT_EQ(c.points.size(), 4000);  // 3x as many corrupted as clean
    std::int64_t clean_count = 0;
    for (std::int64_t i = 0; i < c.points.size(); ++i) {
        if (c.clean_mask[static_cast<std::size_t>(i)]) {
            ++clean_count;
            ASSERT_EQ(c.points.row(i)[0], clean.row(i)[0]);  // clean points untouched
        } else {
            EXPECT_LE((c.points.point(i) - offset).norm(), 2.0 + 1e-12);
        }
    }
    EXPECT_EQ(clean_count, 1000);
}

TEST(Corrupt, CleanFractionWithinOnePointOfRounding) {
    const PointSet clean = sample_gaussian(Vector::Zero(2), 1.0, 777, 9);
    const auto c = corrupt(clean, 0.3, UniformBox{50.0}, 10);
    const double frac = 777.0 / static_cast<double>(c.points.size());
    EXPECT_NEAR(frac, 0.3, 0.3 / 777.0 + 1e-9);
}

TEST(Corrupt, MixtureStrategyRealizesGmm) {
    // alpha-corrupting a single Gaussian with a (k-1)-component mixture is
    // exactly how the mixture learners view their input.
    GmmModel rest;
    Vector m1 = Vector::Zero(2);
    m1[0] = 30.0;
    rest.components.push_back({1.0, m1, 1.0});
    const PointSet clean = sample_gaussian(Vector::Zero(2), 1.0, 2000, 11);
    const auto c = corrupt(clean, 0.5, MixtureOfGaussians{rest}, 12);
    EXPECT_EQ(c.points.size(), 4000);
    double far_mean = 0.0;
    std::int64_t bad = 0;
    for (std::int64_t i = 0; i < c.points.size(); ++i)
        if (!c.clean_mask[static_cast<std::size_t>(i)]) {
            far_mean += c.points.row(i)[0];
            ++bad;
        }
    EXPECT_NEAR(far_mean / static_cast<double>(bad), 30.0, 0.2);
}

TEST(DatasetIo, BitExactRoundTrip) {
    const PointSet pts = sample_gaussian(Vector::Zero(3), 1.0, 200, 13);
    const auto dir = std::filesystem::temp_directory_path() / "ldgauss_io_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "roundtrip.data").string();
    write_dataset(path, pts);
    const PointSet back = read_dataset(path);
    ASSERT_EQ(back.size(), pts.size());
    ASSERT_EQ(back.dim(), pts.dim());
    for (std::int64_t i = 0; i < pts.size(); ++i)
        for (int j = 0; j < pts.dim(); ++j) ASSERT_EQ(back.row(i)[j], pts.row(i)[j]);

    std::vector<std::uint8_t> mask(200, 0);
    for (std::size_t i = 0; i < 200; i += 3) mask[i] = 1;
    const std::string mpath = (dir / "roundtrip.mask").string();
    write_mask(mpath, mask);
    EXPECT_EQ(read_mask(mpath), mask);
    std::filesystem::remove_all(dir);
}

TEST(PointSet, SubsetViewsShareStorage) {
    const PointSet root = sample_gaussian(Vector::Zero(2), 1.0, 100, 17);
    const PointSet sub = root.subset({5, 7, 9});
    EXPECT_EQ(sub.size(), 3);
    EXPECT_EQ(sub.row(0)[0], root.row(5)[0]);
    const PointSet subsub = sub.subset({2});
    EXPECT_EQ(subsub.root_index(0), 9);
    EXPECT_THROW(root.subset({}), precondition_error);
}
