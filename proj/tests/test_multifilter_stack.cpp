#include "ldgauss/datagen.hpp"
#include "ldgauss/multifilter.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ldgauss;
using ldgauss::testing::random_tensor;

namespace {

CandidateSet gaussian_candidate(int n, std::int64_t m, double alpha, std::uint64_t seed,
                                const Vector& mu) {
    CandidateSet c;
    c.points = sample_gaussian(mu, 1.0, m, seed);
    c.alpha = alpha;
    c.stream = seed + 1;
    return c;
}

CandidateSet bimodal_candidate(int n, std::int64_t m, double alpha, std::uint64_t seed, double gap) {
    Vector mu0 = Vector::Zero(n);
    Vector mu1 = Vector::Zero(n);
    mu1[0] = gap;
    GmmModel model;
    model.components.push_back({0.5, mu0, 1.0});
    model.components.push_back({0.5, mu1, 1.0});
    CandidateSet c;
    c.points = sample_gmm(model, m, seed).points;
    c.alpha = alpha;
    c.stream = seed + 1;
    return c;
}

}  // namespace

TEST(Degree2, ScaledIdentityOnTightClusterIsYes) {
    const int n = 5;
    const auto T = gaussian_candidate(n, 3000, 0.5, 11, Vector::Zero(n));
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) / n;
    FilterParams params;
    params.d = 2;
    const auto out = degree2_homogeneous(A, T, params);
    EXPECT_EQ(out.kind, MultifilterOutcome::Kind::Yes);
}

TEST(Degree2, RankOneBimodalSplitsAlongV) {
    const int n = 5;
    const auto T = bimodal_candidate(n, 4000, 0.5, 13, 40.0);
    Vector v = Vector::Zero(n);
    v[0] = 1.0;
    const Eigen::MatrixXd A = v * v.transpose();
    FilterParams params;
    params.d = 2;
    const auto out = degree2_homogeneous(A, T, params);
    ASSERT_EQ(out.kind, MultifilterOutcome::Kind::Split);
    // The split separates the clusters along v: each part is dominated by
    // one sign of v . (x - mu).
    for (const auto& part : out.parts) {
        std::int64_t low = 0;
        for (std::int64_t i = 0; i < part.points.size(); ++i)
            if (part.points.point(i)[0] < 20.0) ++low;
        const double frac = static_cast<double>(low) / static_cast<double>(part.points.size());
        EXPECT_TRUE(frac < 0.05 || frac > 0.95);
    }
}

TEST(Degree2, TraceNormPreconditionEnforced) {
    const int n = 3;
    const auto T = gaussian_candidate(n, 500, 0.5, 17, Vector::Zero(n));
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);  // trace norm 3
    FilterParams params;
    EXPECT_THROW(degree2_homogeneous(A, T, params), precondition_error);
}

TEST(Degree2, EigenvalueSumIsTraceNorm) {
    RngStream rng(23, 0);
    Eigen::MatrixXd A(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) A(i, j) = A(j, i) = rng.gaussian();
    const auto pairs = selfadjoint_eigenpairs(A);
    double sum = 0.0;
    for (const auto& p : pairs) sum += std::abs(p.value);
    // Trace norm = sum of singular values = sum |lambda_i| for symmetric A.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    EXPECT_NEAR(sum, svd.singularValues().sum(), 1e-10);
}

TEST(Multilinear, DegreeOneMatchesBasicOnLinearForm) {
    const int n = 4;
    const auto T = bimodal_candidate(n, 2000, 0.5, 29, 35.0);
    SymTensor A(n, 1);
    A.set(MultiIndex({0}), 1.0);
    FilterParams params;
    params.d = 1;
    RngStream rng(1, 1);
    const auto out = multilinear_multifilter(A, T, params, 0.01, rng);

    const Vector mu = T.points.empirical_mean();
    std::vector<double> pvals(static_cast<std::size_t>(T.points.size()));
    for (std::int64_t i = 0; i < T.points.size(); ++i)
        pvals[static_cast<std::size_t>(i)] = T.points.point(i)[0] - mu[0];
    const auto direct = basic_multifilter(pvals, T, params);
    ASSERT_EQ(out.kind, direct.kind);
    ASSERT_EQ(out.parts.size(), direct.parts.size());
    for (std::size_t p = 0; p < out.parts.size(); ++p) {
        EXPECT_EQ(out.parts[p].points.size(), direct.parts[p].points.size());
        EXPECT_DOUBLE_EQ(out.parts[p].alpha, direct.parts[p].alpha);
    }
}

TEST(Multilinear, CleanDataCalibration) {
    // Clean N(0, I), d = 2: Yes in at least 9 of 10 seeds.
    const int n = 5;
    int yes = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto T = gaussian_candidate(n, 4000, 0.5, seed * 131, Vector::Zero(n));
        RngStream rng(seed, 2);
        SymTensor A = random_tensor(n, 2, rng, true);
        FilterParams params;
        params.d = 2;
        params.rng_seed = seed;
        RngStream filter_rng(seed, 3);
        const auto out = multilinear_multifilter(A, T, params, 0.01, filter_rng);
        if (out.kind == MultifilterOutcome::Kind::Yes) ++yes;
    }
    EXPECT_GE(yes, 9);
}

TEST(Multilinear, RecursionFanOutBound) {
    const int n = 3;
    const int d = 2;
    const double tau = 0.05;
    const double alpha = 0.5;
    const auto T = gaussian_candidate(n, 500, alpha, 41, Vector::Zero(n));
    RngStream rng(5, 7);
    SymTensor A = random_tensor(n, d, rng, true);
    FilterParams params;
    params.d = d;
    FilterTrace trace;
    RngStream filter_rng(5, 8);
    multilinear_multifilter(A, T, params, tau, filter_rng, &trace);
    const double bound =
        std::pow(params.C * (std::log(1.0 / tau) + d) / alpha, static_cast<double>(d));
    EXPECT_LE(static_cast<double>(trace.multilinear_calls), bound);
}

TEST(Harmonic, CleanDataCalibration) {
    // Clean N(mu, I), d = 2, n = 10: Yes in at least 9 of 10 seeds.
    const int n = 10;
    Vector mu = Vector::Ones(n) * 0.5;
    int yes = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto T = gaussian_candidate(n, 5000, 0.5, seed * 977, mu);
        RngStream rng(seed, 4);
        SymTensor A = random_tensor(n, 2, rng, true);
        FilterParams params;
        params.d = 2;
        RngStream filter_rng(seed, 5);
        const auto out = harmonic_multifilter(A, T, params, 0.01, filter_rng);
        if (out.kind == MultifilterOutcome::Kind::Yes) ++yes;
    }
    EXPECT_GE(yes, 9);
}

TEST(Harmonic, BSpectraArePsdWithUnitTraceForNormalizedTensors) {
    RngStream rng(43, 0);
    const SymTensor A = random_tensor(4, 3, rng, true);
    for (int dp = 0; dp <= 3; ++dp) {
        const Matrix B = b_tensor_matrix(A, dp);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
        EXPECT_NEAR(es.eigenvalues().sum(), 1.0, 1e-9);
    }
}

TEST(MainSubroutine, CleanDataReturnsAccurateMean) {
    const int n = 5;
    const std::int64_t m = 10000;
    CandidateSet T = gaussian_candidate(n, m, 1.0, 57, Vector::Zero(n));
    FilterParams params;
    params.d = 1;
    params.rng_seed = 3;
    const auto out = main_subroutine(T, params);
    ASSERT_EQ(out.kind, MultifilterOutcome::Kind::Vector);
    // CLT bound with slack: 5/sqrt(m) * sqrt(n) * 3.
    EXPECT_LE(out.mean.norm(), 5.0 / std::sqrt(static_cast<double>(m)) * std::sqrt(5.0) * 3.0);
}

TEST(MainSubroutine, FarMixtureNeverCertifiesOnFirstCall) {
    // 0.3 N(0,I) + 0.7 N(20 e1, I): the empirical variance along e1 is about
    // 1 + 0.21 * 400, far above the certification threshold, so the first
    // call must split (or reject), never return a vector.
    const int n = 10;
    Vector far = Vector::Zero(n);
    far[0] = 20.0;
    GmmModel model;
    model.components.push_back({0.3, Vector::Zero(n), 1.0});
    model.components.push_back({0.7, far, 1.0});
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CandidateSet T;
        T.points = sample_gmm(model, 4000, seed * 271).points;
        T.alpha = 0.3;
        T.stream = seed;
        FilterParams params;
        params.d = 1;
        params.rng_seed = seed;
        const auto out = main_subroutine(T, params);
        EXPECT_NE(out.kind, MultifilterOutcome::Kind::Vector) << "seed " << seed;
    }
}

TEST(MainSubroutine, SigmaDiagonalIsNearOneOnCleanData) {
    // The empirical second-moment matrix of the normalized Hermite basis on
    // clean N(0, I) data has unit diagonal (orthonormality).
    const int n = 3;
    const int d = 2;
    const std::int64_t m = 100000;
    const PointSet pts = sample_gaussian(Vector::Zero(n), 1.0, m, 91);
    const Vector mu = pts.empirical_mean();
    const HermiteBasis basis(n, d);
    Vector diag = Vector::Zero(basis.size());
    Vector row(basis.size());
    Vector y(n);
    for (std::int64_t i = 0; i < m; ++i) {
        y = pts.point(i) - mu;
        basis.eval_into(y.data(), row.data());
        diag += row.cwiseProduct(row);
    }
    diag /= static_cast<double>(m);
    for (Eigen::Index i = 0; i < diag.size(); ++i) EXPECT_NEAR(diag[i], 1.0, 0.1);
}

TEST(MainSubroutine, RespectsMinSubsetFloor) {
    CandidateSet T = gaussian_candidate(3, 30, 0.5, 3, Vector::Zero(3));
    FilterParams params;
    params.min_subset = 50;
    EXPECT_THROW(main_subroutine(T, params), precondition_error);
}

TEST(MainSubroutine, DeterministicAcrossRuns) {
    const int n = 4;
    CandidateSet T = bimodal_candidate(n, 3000, 0.4, 73, 30.0);
    FilterParams params;
    params.d = 1;
    params.rng_seed = 99;
    const auto a = main_subroutine(T, params);
    const auto b = main_subroutine(T, params);
    ASSERT_EQ(a.kind, b.kind);
    if (a.kind == MultifilterOutcome::Kind::Split) {
        ASSERT_EQ(a.parts.size(), b.parts.size());
        for (std::size_t i = 0; i < a.parts.size(); ++i) {
            EXPECT_EQ(a.parts[i].points.size(), b.parts[i].points.size());
            EXPECT_EQ(a.parts[i].alpha, b.parts[i].alpha);
        }
    }
}
