#pragma once

#include "ldgauss/common.hpp"
#include "ldgauss/rng.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <vector>

namespace ldgauss {

struct EigenPair {
    double value = 0.0;
    Vector vector;
};

// Top eigenpair of a symmetric PSD matrix by power iteration with a
// seed-derived start, Rayleigh-quotient stopping at 1e-9 relative change,
// at most 10^4 iterations.
inline EigenPair power_iteration_top(const Eigen::MatrixXd& M, RngStream rng, double tol = 1e-9,
                                     int max_iter = 10000) {
    const auto dim = M.rows();
    if (dim == 0 || M.cols() != dim) throw precondition_error("power_iteration_top: bad matrix");
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.gaussian();
    v.normalize();
    double lambda = v.dot(M * v);
    for (int it = 0; it < max_iter; ++it) {
        Vector w = M * v;
        const double nw = w.norm();
        if (nw <= 1e-300) return {0.0, v};  // operator is (numerically) zero on v
        w /= nw;
        const double lam = w.dot(M * w);
        const bool converged = std::abs(lam - lambda) <= tol * std::max(std::abs(lam), 1e-300) && it > 1;
        v = w;
        lambda = lam;
        if (converged) return {lambda, v};
    }
    throw eigen_failure("power_iteration_top: no convergence within iteration budget");
}

// Full symmetric eigendecomposition, pairs ordered by decreasing |value|.
inline std::vector<EigenPair> selfadjoint_eigenpairs(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw eigen_failure("selfadjoint_eigenpairs: solver failed");
    std::vector<EigenPair> pairs;
    pairs.reserve(static_cast<std::size_t>(M.rows()));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        pairs.push_back({es.eigenvalues()[i], es.eigenvectors().col(i)});
    std::sort(pairs.begin(), pairs.end(),
              [](const EigenPair& a, const EigenPair& b) { return std::abs(a.value) > std::abs(b.value); });
    return pairs;
}

// Leading eigenpairs of a PSD operator given only as a matvec, extracted by
// power iteration with deflation until the eigenvalue drops below
// `min_value` or `max_rank` pairs are found.
inline std::vector<EigenPair> deflated_eigenpairs(
    const std::function<Vector(const Vector&)>& matvec, Eigen::Index dim, int max_rank,
    double min_value, RngStream rng) {
    std::vector<EigenPair> pairs;
    for (int r = 0; r < max_rank; ++r) {
        Vector v(dim);
        RngStream start = rng.derive(static_cast<std::uint64_t>(r) + 17);
        for (Eigen::Index i = 0; i < dim; ++i) v[i] = start.gaussian();
        for (const auto& p : pairs) v -= p.vector * p.vector.dot(v);
        if (v.norm() <= 1e-300) break;
        v.normalize();
        double lambda = 0.0;
        bool ok = false;
        for (int it = 0; it < 10000; ++it) {
            Vector w = matvec(v);
            for (const auto& p : pairs) w -= p.vector * (p.value * p.vector.dot(w));
            const double nw = w.norm();
            if (nw <= 1e-300) {
                lambda = 0.0;
                ok = true;
                break;
            }
            w /= nw;
            const double lam = w.dot(matvec(w)) - [&] {
                double s = 0.0;
                for (const auto& p : pairs) s += p.value * sq(p.vector.dot(w));
                return s;
            }();
            const bool converged = std::abs(lam - lambda) <= 1e-9 * std::max(std::abs(lam), 1e-300) && it > 1;
            v = w;
            lambda = lam;
            if (converged) {
                ok = true;
                break;
            }
        }
        if (!ok) throw eigen_failure("deflated_eigenpairs: no convergence");
        if (lambda < min_value) break;
        pairs.push_back({lambda, v});
    }
    return pairs;
}

}  // namespace ldgauss
