#pragma once

#include "ldgauss/common.hpp"

#include <map>
#include <vector>

namespace ldgauss {

// Probabilist's Hermite polynomial He_deg(x) (monic), three-term recurrence
// He_{k+1}(x) = x He_k(x) - k He_{k-1}(x).
inline double hermite_eval(int deg, double x) {
    if (deg < 0) throw precondition_error("hermite_eval: deg must be >= 0");
    double prev = 1.0;  // He_0
    if (deg == 0) return prev;
    double cur = x;  // He_1
    for (int k = 1; k < deg; ++k) {
        const double next = x * cur - static_cast<double>(k) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

// He_0(x) .. He_dmax(x) in one pass.
inline void hermite_all(int dmax, double x, double* out) {
    out[0] = 1.0;
    if (dmax == 0) return;
    out[1] = x;
    for (int k = 1; k < dmax; ++k) out[k + 1] = x * out[k] - static_cast<double>(k) * out[k - 1];
}

// Normalized Hermite product basis for degree-d harmonic polynomials in n
// variables: one entry per exponent vector a >= 0 with sum(a) = d, evaluated
// as prod_i He_{a_i}(x_i) / sqrt(a_i!).
//
// Entry order is ascending lexicographic on a = (a_1, ..., a_n), i.e.
// (0,...,0,d) first and (d,0,...,0) last. Length is C(n+d-1, d).
class HermiteBasis {
public:
    HermiteBasis(int n, int d) : n_(n), d_(d) {
        if (n < 1) throw precondition_error("HermiteBasis: n must be >= 1");
        if (d < 0 || d > kMaxOrder) throw precondition_error("HermiteBasis: order out of range");
        std::vector<int> a(static_cast<std::size_t>(n), 0);
        emit(a, 0, d);
    }

    int n() const { return n_; }
    int degree() const { return d_; }
    std::int64_t size() const { return static_cast<std::int64_t>(entries_.size()); }

    // Sparse exponents of entry k: (coordinate, power) pairs, and the
    // normalization 1/sqrt(prod a_i!).
    const std::vector<std::pair<int, int>>& exponents(std::int64_t k) const {
        return entries_[static_cast<std::size_t>(k)];
    }
    double norm_factor(std::int64_t k) const { return norm_[static_cast<std::size_t>(k)]; }

    std::int64_t index_of(const std::vector<int>& a) const {
        auto it = index_.find(a);
        if (it == index_.end()) throw precondition_error("HermiteBasis: unknown exponent vector");
        return it->second;
    }

    Vector eval(const Vector& x) const {
        if (x.size() != n_) throw precondition_error("HermiteBasis::eval: dimension mismatch");
        Vector out(size());
        eval_into(x.data(), out.data());
        return out;
    }

    // x and out are raw pointers so callers can fill matrix rows in place.
    void eval_into(const double* x, double* out) const {
        std::vector<double> he(static_cast<std::size_t>(n_) * (d_ + 1));
        for (int i = 0; i < n_; ++i) hermite_all(d_, x[i], he.data() + static_cast<std::size_t>(i) * (d_ + 1));
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            double v = norm_[k];
            for (const auto& [coord, pow] : entries_[k])
                v *= he[static_cast<std::size_t>(coord) * (d_ + 1) + pow];
            out[k] = v;
        }
    }

private:
    void emit(std::vector<int>& a, int coord, int remaining) {
        if (coord == n_ - 1) {
            a[static_cast<std::size_t>(coord)] = remaining;
            push(a);
            a[static_cast<std::size_t>(coord)] = 0;
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            a[static_cast<std::size_t>(coord)] = v;
            emit(a, coord + 1, remaining - v);
        }
        a[static_cast<std::size_t>(coord)] = 0;
    }

    void push(const std::vector<int>& a) {
        std::vector<std::pair<int, int>> sparse;
        double fac = 1.0;
        for (int i = 0; i < n_; ++i) {
            if (a[static_cast<std::size_t>(i)] > 0) {
                sparse.emplace_back(i, a[static_cast<std::size_t>(i)]);
                fac *= factorial(a[static_cast<std::size_t>(i)]);
            }
        }
        index_[a] = static_cast<std::int64_t>(entries_.size());
        entries_.push_back(std::move(sparse));
        norm_.push_back(1.0 / std::sqrt(fac));
    }

    int n_;
    int d_;
    std::vector<std::vector<std::pair<int, int>>> entries_;
    std::vector<double> norm_;
    std::map<std::vector<int>, std::int64_t> index_;
};

}  // namespace ldgauss
