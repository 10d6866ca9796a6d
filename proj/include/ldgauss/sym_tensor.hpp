#pragma once

#include "ldgauss/common.hpp"
#include "ldgauss/hermite.hpp"
#include "ldgauss/multi_index.hpp"

#include <algorithm>
#include <map>
#include <span>
#include <vector>

namespace ldgauss {

// Symmetric order-d tensor over R^n, stored as one coefficient per sorted
// index multiset. The full tensor entry at any permutation of a multiset
// equals the stored value; multiplicities (d! / prod c_j!) enter at norm and
// evaluation time. Immutable in spirit: operations return new tensors.
class SymTensor {
public:
    SymTensor(int n, int d) : n_(n), d_(d) {
        if (n < 1) throw precondition_error("SymTensor: n must be >= 1");
        if (d < 0 || d > kMaxOrder) throw precondition_error("SymTensor: order out of range");
    }

    int n() const { return n_; }
    int order() const { return d_; }

    void set(const MultiIndex& idx, double value) {
        if (idx.order() != d_) throw precondition_error("SymTensor::set: order mismatch");
        if (d_ > 0 && idx.max_index() >= static_cast<std::uint32_t>(n_))
            throw precondition_error("SymTensor::set: index out of range");
        if (value == 0.0)
            coeffs_.erase(idx);
        else
            coeffs_[idx] = value;
    }

    void add(const MultiIndex& idx, double value) { set(idx, coeff(idx) + value); }

    double coeff(const MultiIndex& idx) const {
        auto it = coeffs_.find(idx);
        return it == coeffs_.end() ? 0.0 : it->second;
    }

    const std::map<MultiIndex, double>& coeffs() const { return coeffs_; }

    // Entry-wise l2 norm over all n^d index tuples:
    // sqrt(sum over multisets of multiplicity * value^2).
    double l2_norm_sq() const {
        double s = 0.0;
        for (const auto& [idx, v] : coeffs_) s += idx.multiplicity() * v * v;
        return s;
    }
    double l2_norm() const { return std::sqrt(l2_norm_sq()); }

    bool is_normalized(double tol = 1e-9) const { return std::abs(l2_norm() - 1.0) <= tol; }

    SymTensor scaled(double factor) const {
        SymTensor out(n_, d_);
        for (const auto& [idx, v] : coeffs_) out.coeffs_[idx] = v * factor;
        return out;
    }

    SymTensor normalized() const {
        const double nrm = l2_norm();
        if (nrm == 0.0) throw precondition_error("SymTensor::normalized: zero tensor");
        return scaled(1.0 / nrm);
    }

private:
    int n_;
    int d_;
    std::map<MultiIndex, double> coeffs_;
};

// Hom_A(x) = A(x, ..., x).
inline double hom_eval(const SymTensor& A, const Vector& x) {
    if (x.size() != A.n()) throw precondition_error("hom_eval: dimension mismatch");
    double total = 0.0;
    for (const auto& [idx, v] : A.coeffs()) {
        double term = v * idx.multiplicity();
        for (const auto& [coord, cnt] : idx.counts()) term *= ipow(x[coord], cnt);
        total += term;
    }
    return total;
}

// Degree-d harmonic polynomial h_A with
// sqrt(d!) h_A(x) = sum_{i_1..i_d} A_{i_1..i_d} prod_j He_{c_j}(x_j).
inline double harmonic_eval(const SymTensor& A, const Vector& x) {
    if (x.size() != A.n()) throw precondition_error("harmonic_eval: dimension mismatch");
    double total = 0.0;
    for (const auto& [idx, v] : A.coeffs()) {
        double term = v * idx.multiplicity();
        for (const auto& [coord, cnt] : idx.counts()) term *= hermite_eval(cnt, x[coord]);
        total += term;
    }
    return total / std::sqrt(factorial(A.order()));
}

// A(x_1, ..., x_d): linear in each slot. Evaluated by summing, per stored
// multiset, over its distinct slot assignments.
inline double multilinear_eval(const SymTensor& A, std::span<const Vector> xs) {
    if (static_cast<int>(xs.size()) != A.order())
        throw precondition_error("multilinear_eval: need exactly d argument vectors");
    for (const auto& x : xs)
        if (x.size() != A.n()) throw precondition_error("multilinear_eval: dimension mismatch");
    if (A.order() == 0) {
        double t = 0.0;
        for (const auto& [idx, v] : A.coeffs()) t += v;
        return t;
    }
    double total = 0.0;
    for (const auto& [idx, v] : A.coeffs()) {
        std::vector<std::uint32_t> perm = idx.entries();  // sorted = first permutation
        double sum = 0.0;
        do {
            double p = 1.0;
            for (std::size_t slot = 0; slot < perm.size(); ++slot) p *= xs[slot][perm[slot]];
            sum += p;
        } while (std::next_permutation(perm.begin(), perm.end()));
        total += v * sum;
    }
    return total;
}

// (Ax)_{i_2..i_d} = sum_{i_1} x_{i_1} A_{i_1, i_2, .., i_d}; symmetric of
// order d-1 because A is symmetric.
inline SymTensor contract(const SymTensor& A, const Vector& x) {
    if (A.order() < 1) throw precondition_error("contract: tensor order must be >= 1");
    if (x.size() != A.n()) throw precondition_error("contract: dimension mismatch");
    SymTensor out(A.n(), A.order() - 1);
    for (const auto& [idx, v] : A.coeffs()) {
        for (const auto& [coord, cnt] : idx.counts()) {
            (void)cnt;
            out.add(idx.without(coord), x[coord] * v);
        }
    }
    return out;
}

namespace detail {

// Flattened row-major tuple index: i_1 most significant.
inline std::int64_t flatten_tuple(std::span<const std::uint32_t> tuple, int n) {
    std::int64_t f = 0;
    for (auto v : tuple) f = f * n + static_cast<std::int64_t>(v);
    return f;
}

// Dense unfolding with rows indexed by the last `d - split` coordinates and
// columns by the first `split`. Gated by kDenseGate on n^d entries.
inline Matrix unfold(const SymTensor& A, int split) {
    const int n = A.n();
    const int d = A.order();
    double total = 1.0;
    for (int i = 0; i < d; ++i) total *= n;
    if (total > static_cast<double>(kDenseGate))
        throw precondition_error("unfold: n^d exceeds the dense gate");
    const std::int64_t cols = static_cast<std::int64_t>(ipow(static_cast<double>(n), split));
    const std::int64_t rows = static_cast<std::int64_t>(total / static_cast<double>(cols));
    Matrix M = Matrix::Zero(rows, cols);
    std::vector<std::uint32_t> tuple(static_cast<std::size_t>(d), 0);
    bool done = (d == 0);
    for (;;) {
        std::vector<std::uint32_t> sorted(tuple);
        std::sort(sorted.begin(), sorted.end());
        const double v = A.coeff(MultiIndex::from_sorted(std::move(sorted)));
        if (v != 0.0) {
            const auto col = flatten_tuple(std::span(tuple).first(static_cast<std::size_t>(split)), n);
            const auto row = flatten_tuple(std::span(tuple).subspan(static_cast<std::size_t>(split)), n);
            M(row, col) = v;
        }
        if (done) break;
        int pos = d - 1;
        while (pos >= 0 && tuple[static_cast<std::size_t>(pos)] + 1 == static_cast<std::uint32_t>(n)) {
            tuple[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++tuple[static_cast<std::size_t>(pos)];
    }
    return M;
}

}  // namespace detail

// B^(d') as an n^d' x n^d' matrix:
// B_{(i),(j)} = sum_{k_{d'+1..d}} A_{i,k} A_{j,k}, rows/cols flattened
// row-major over the d'-tuples. Positive semidefinite with trace ||A||_2^2.
inline Matrix b_tensor_matrix(const SymTensor& A, int dprime) {
    if (dprime < 0 || dprime > A.order())
        throw precondition_error("b_tensor_matrix: dprime out of range");
    const double dim = ipow(static_cast<double>(A.n()), dprime);
    if (dim > 2000.0) throw precondition_error("b_tensor_matrix: n^dprime too large to materialize");
    const Matrix unfolded = detail::unfold(A, dprime);
    return unfolded.transpose() * unfolded;
}

struct HarmonicMoments {
    double mean = 0.0;
    double second_moment = 0.0;
};

// First two moments of h_A(X), X ~ N(mu, I):
//   mean = Hom_A(mu) / sqrt(d!)
//   E[h_A^2] = sum_{e=0..d} C(d,e)/e! * ||A mu^{x e}||_2^2,
// where A mu^{x e} contracts e slots with mu. The e-th term equals
// Hom_{B^(e)}(mu), so e = 0 contributes ||A||_2^2 and e = d contributes
// Hom_A(mu)^2 / d!.
inline HarmonicMoments harmonic_moments(const SymTensor& A, const Vector& mu) {
    if (mu.size() != A.n()) throw precondition_error("harmonic_moments: dimension mismatch");
    const int d = A.order();
    HarmonicMoments out;
    out.mean = hom_eval(A, mu) / std::sqrt(factorial(d));
    SymTensor cur = A;
    for (int e = 0; e <= d; ++e) {
        out.second_moment += binomial(d, e) / factorial(e) * cur.l2_norm_sq();
        if (e < d) cur = contract(cur, mu);
    }
    return out;
}

// Tensor of the harmonic polynomial v . P_{n,d}(x): for basis exponent a,
// the multiset with count vector a gets value v_a / sqrt(d! / prod a_j!).
// Then harmonic_eval(A, x) = v . P_{n,d}(x) and ||A||_2 = ||v||_2.
inline SymTensor tensor_from_coeff_vector(const Vector& v, const HermiteBasis& basis) {
    if (v.size() != basis.size())
        throw precondition_error("tensor_from_coeff_vector: length mismatch");
    SymTensor A(basis.n(), basis.degree());
    for (std::int64_t k = 0; k < basis.size(); ++k) {
        if (v[k] == 0.0) continue;
        std::vector<std::uint32_t> entries;
        for (const auto& [coord, pow] : basis.exponents(k))
            entries.insert(entries.end(), static_cast<std::size_t>(pow),
                           static_cast<std::uint32_t>(coord));
        MultiIndex idx = MultiIndex::from_sorted(std::move(entries));
        A.set(idx, v[k] / std::sqrt(idx.multiplicity()));
    }
    return A;
}

// Inverse of tensor_from_coeff_vector.
inline Vector coeff_vector(const SymTensor& A, const HermiteBasis& basis) {
    if (A.n() != basis.n() || A.order() != basis.degree())
        throw precondition_error("coeff_vector: basis mismatch");
    Vector v = Vector::Zero(basis.size());
    for (const auto& [idx, val] : A.coeffs()) {
        std::vector<int> a(static_cast<std::size_t>(A.n()), 0);
        for (const auto& [coord, cnt] : idx.counts()) a[coord] = cnt;
        v[basis.index_of(a)] = val * std::sqrt(idx.multiplicity());
    }
    return v;
}

// Reassemble a flattened order-d tuple vector (e.g. an eigenvector of a
// B^(d') matrix) into a symmetric tensor. Reports the largest deviation
// between entries that should agree by symmetry; callers decide how much
// asymmetry to tolerate.
inline SymTensor tensor_from_flat(const Vector& v, int n, int d, double* max_asym = nullptr) {
    double total = 1.0;
    for (int i = 0; i < d; ++i) total *= n;
    if (static_cast<double>(v.size()) != total)
        throw precondition_error("tensor_from_flat: length must be n^d");
    struct Acc {
        double sum = 0.0, lo = 0.0, hi = 0.0;
        std::int64_t cnt = 0;
    };
    std::map<MultiIndex, Acc> acc;
    std::vector<std::uint32_t> tuple(static_cast<std::size_t>(d), 0);
    for (std::int64_t flat = 0; flat < v.size(); ++flat) {
        std::vector<std::uint32_t> sorted(tuple);
        std::sort(sorted.begin(), sorted.end());
        auto& a = acc[MultiIndex::from_sorted(std::move(sorted))];
        const double val = v[flat];
        if (a.cnt == 0) {
            a.lo = a.hi = val;
        } else {
            a.lo = std::min(a.lo, val);
            a.hi = std::max(a.hi, val);
        }
        a.sum += val;
        ++a.cnt;
        int pos = d - 1;
        while (pos >= 0 && tuple[static_cast<std::size_t>(pos)] + 1 == static_cast<std::uint32_t>(n)) {
            tuple[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++tuple[static_cast<std::size_t>(pos)];
    }
    SymTensor A(n, d);
    double asym = 0.0;
    for (const auto& [idx, a] : acc) {
        asym = std::max(asym, a.hi - a.lo);
        A.set(idx, a.sum / static_cast<double>(a.cnt));
    }
    if (max_asym != nullptr) *max_asym = asym;
    return A;
}

}  // namespace ldgauss
