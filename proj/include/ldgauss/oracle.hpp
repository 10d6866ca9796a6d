#pragma once

#include "ldgauss/common.hpp"
#include "ldgauss/listdecode.hpp"
#include "ldgauss/point_set.hpp"
#include "ldgauss/rng.hpp"
#include "ldgauss/sym_tensor.hpp"

#include <algorithm>
#include <span>
#include <vector>

// Slow reference implementations used by tests and acceptance checks. These
// deliberately avoid the fast paths they validate: tensor operations run as
// dense loops over all n^d index tuples, moments come from Monte-Carlo.
namespace ldgauss::oracle {

namespace detail {

inline void check_dense_gate(int n, int d) {
    double total = 1.0;
    for (int i = 0; i < d; ++i) total *= n;
    if (total > static_cast<double>(kDenseGate))
        throw precondition_error("dense oracle: n^d exceeds the gate");
}

template <typename Fn>
void for_each_tuple(int n, int d, Fn&& fn) {
    std::vector<std::uint32_t> tuple(static_cast<std::size_t>(d), 0);
    for (;;) {
        fn(std::span<const std::uint32_t>(tuple));
        int pos = d - 1;
        while (pos >= 0 && tuple[static_cast<std::size_t>(pos)] + 1 == static_cast<std::uint32_t>(n)) {
            tuple[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++tuple[static_cast<std::size_t>(pos)];
    }
}

inline double entry(const SymTensor& A, std::span<const std::uint32_t> tuple) {
    std::vector<std::uint32_t> sorted(tuple.begin(), tuple.end());
    std::sort(sorted.begin(), sorted.end());
    return A.coeff(MultiIndex::from_sorted(std::move(sorted)));
}

}  // namespace detail

inline double dense_hom_eval(const SymTensor& A, const Vector& x) {
    detail::check_dense_gate(A.n(), A.order());
    double total = 0.0;
    detail::for_each_tuple(A.n(), A.order(), [&](std::span<const std::uint32_t> t) {
        double p = detail::entry(A, t);
        for (auto i : t) p *= x[i];
        total += p;
    });
    return total;
}

inline double dense_multilinear_eval(const SymTensor& A, std::span<const Vector> xs) {
    detail::check_dense_gate(A.n(), A.order());
    if (static_cast<int>(xs.size()) != A.order())
        throw precondition_error("dense_multilinear_eval: arity mismatch");
    double total = 0.0;
    detail::for_each_tuple(A.n(), A.order(), [&](std::span<const std::uint32_t> t) {
        double p = detail::entry(A, t);
        for (std::size_t slot = 0; slot < t.size(); ++slot) p *= xs[slot][t[slot]];
        total += p;
    });
    return total;
}

inline double dense_harmonic_eval(const SymTensor& A, const Vector& x) {
    detail::check_dense_gate(A.n(), A.order());
    double total = 0.0;
    detail::for_each_tuple(A.n(), A.order(), [&](std::span<const std::uint32_t> t) {
        double p = detail::entry(A, t);
        std::vector<int> counts(static_cast<std::size_t>(A.n()), 0);
        for (auto i : t) ++counts[i];
        for (int j = 0; j < A.n(); ++j)
            if (counts[static_cast<std::size_t>(j)] > 0)
                p *= hermite_eval(counts[static_cast<std::size_t>(j)], x[j]);
        total += p;
    });
    return total / std::sqrt(factorial(A.order()));
}

inline SymTensor dense_contract(const SymTensor& A, const Vector& x) {
    detail::check_dense_gate(A.n(), A.order());
    SymTensor out(A.n(), A.order() - 1);
    detail::for_each_tuple(A.n(), A.order() - 1, [&](std::span<const std::uint32_t> rest) {
        double v = 0.0;
        std::vector<std::uint32_t> full(rest.begin(), rest.end());
        full.insert(full.begin(), 0);
        for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(A.n()); ++i) {
            full[0] = i;
            v += x[i] * detail::entry(A, full);
        }
        std::vector<std::uint32_t> sorted(rest.begin(), rest.end());
        std::sort(sorted.begin(), sorted.end());
        out.set(MultiIndex::from_sorted(std::move(sorted)), v);
    });
    return out;
}

inline Matrix dense_b_matrix(const SymTensor& A, int dprime) {
    detail::check_dense_gate(A.n(), A.order());
    const int d = A.order();
    if (dprime < 0 || dprime > d) throw precondition_error("dense_b_matrix: dprime out of range");
    const auto dim = static_cast<std::int64_t>(ipow(static_cast<double>(A.n()), dprime));
    Matrix B = Matrix::Zero(dim, dim);
    detail::for_each_tuple(A.n(), dprime, [&](std::span<const std::uint32_t> iidx) {
        const std::int64_t row = ldgauss::detail::flatten_tuple(iidx, A.n());
        detail::for_each_tuple(A.n(), dprime, [&](std::span<const std::uint32_t> jidx) {
            const std::int64_t col = ldgauss::detail::flatten_tuple(jidx, A.n());
            double sum = 0.0;
            detail::for_each_tuple(A.n(), d - dprime, [&](std::span<const std::uint32_t> kidx) {
                std::vector<std::uint32_t> left(iidx.begin(), iidx.end());
                left.insert(left.end(), kidx.begin(), kidx.end());
                std::vector<std::uint32_t> right(jidx.begin(), jidx.end());
                right.insert(right.end(), kidx.begin(), kidx.end());
                sum += detail::entry(A, left) * detail::entry(A, right);
            });
            B(row, col) = sum;
        });
    });
    return B;
}

struct McMoments {
    double mean = 0.0;
    double mean_stderr = 0.0;
    double second = 0.0;
    double second_stderr = 0.0;
};

// Monte-Carlo mean and second moment of h_A(X), X ~ N(mu, I), with standard
// errors. Draws use stream 0 of the given seed.
inline McMoments mc_second_moment(const SymTensor& A, const Vector& mu, std::int64_t trials,
                                  std::uint64_t seed) {
    if (trials < 10000) throw precondition_error("mc_second_moment: need at least 1e4 trials");
    if (mu.size() != A.n()) throw precondition_error("mc_second_moment: dimension mismatch");
    RngStream rng(seed, 0);
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    Vector x(A.n());
    for (std::int64_t t = 0; t < trials; ++t) {
        for (int i = 0; i < A.n(); ++i) x[i] = mu[i] + rng.gaussian();
        const double h = harmonic_eval(A, x);
        s1 += h;
        s2 += h * h;
        s4 += h * h * h * h;
    }
    const auto m = static_cast<double>(trials);
    McMoments out;
    out.mean = s1 / m;
    out.second = s2 / m;
    out.mean_stderr = std::sqrt(std::max(out.second - sq(out.mean), 0.0) / m);
    out.second_stderr = std::sqrt(std::max(s4 / m - sq(out.second), 0.0) / m);
    return out;
}

inline double best_error(const HypothesisList& H, const Vector& mu_true) {
    if (H.size() == 0) throw precondition_error("best_error: empty hypothesis list");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : H.means) best = std::min(best, (h - mu_true).norm());
    return best;
}

// Greedy desk-scale realization of the covering upper bound: candidate
// centers are sample points whose alpha-fraction nearest neighborhood has a
// directional tail of at most alpha/10 beyond radius u over a fixed net of
// 2n axis directions plus 10n seeded random unit vectors; candidates are
// then covered greedily by 2u-balls. The exhaustive argument caps the
// result at 5/alpha centers.
inline HypothesisList covering_estimator(const PointSet& T, double alpha, double u) {
    if (T.size() > 2000) throw precondition_error("covering_estimator: desk scale only (|T| <= 2000)");
    if (!(u > 0.0)) throw precondition_error("covering_estimator: u must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw precondition_error("covering_estimator: bad alpha");
    const int n = T.dim();
    const std::int64_t net_size = 12LL * n;
    if (net_size > 4096) throw resource_cap_error("covering_estimator: direction net cap exceeded");

    std::vector<Vector> net;
    for (int i = 0; i < n; ++i) {
        Vector e = Vector::Zero(n);
        e[i] = 1.0;
        net.push_back(e);
        net.push_back(-e);
    }
    RngStream rng(0xC0FFEEull, 0);
    for (int i = 0; i < 10 * n; ++i) {
        Vector v(n);
        for (int j = 0; j < n; ++j) v[j] = rng.gaussian();
        net.push_back(v / v.norm());
    }

    const auto m = T.size();
    const auto hood = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(alpha * static_cast<double>(m))));
    const auto allowed = alpha / 10.0 * static_cast<double>(hood);

    std::vector<std::int64_t> candidates;
    std::vector<double> d2(static_cast<std::size_t>(m));
    std::vector<std::int64_t> order(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        const Vector xi = T.point(i);
        for (std::int64_t j = 0; j < m; ++j) d2[static_cast<std::size_t>(j)] = (T.point(j) - xi).squaredNorm();
        std::iota(order.begin(), order.end(), std::int64_t{0});
        std::nth_element(order.begin(), order.begin() + (hood - 1), order.end(),
                         [&](std::int64_t a, std::int64_t b) {
                             return d2[static_cast<std::size_t>(a)] < d2[static_cast<std::size_t>(b)];
                         });
        bool pass = true;
        for (const auto& v : net) {
            std::int64_t beyond = 0;
            for (std::int64_t q = 0; q < hood; ++q) {
                if (std::abs(v.dot(T.point(order[static_cast<std::size_t>(q)]) - xi)) >= u) ++beyond;
            }
            if (static_cast<double>(beyond) > allowed) {
                pass = false;
                break;
            }
        }
        if (pass) candidates.push_back(i);
    }

    HypothesisList out;
    const auto cap = static_cast<std::int64_t>(std::floor(5.0 / alpha));
    for (const auto i : candidates) {
        const Vector xi = T.point(i);
        bool covered = false;
        for (const auto& c : out.means)
            if ((c - xi).norm() <= 2.0 * u) {
                covered = true;
                break;
            }
        if (covered) continue;
        out.push(xi, "covering:" + std::to_string(i));
        if (out.size() > cap)
            throw internal_inconsistency("covering_estimator: packing bound exceeded");
    }
    return out;
}

}  // namespace ldgauss::oracle
