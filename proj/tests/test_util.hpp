#pragma once

#include "ldgauss/rng.hpp"
#include "ldgauss/sym_tensor.hpp"

#include <vector>

namespace ldgauss::testing {

inline Vector random_vector(int n, RngStream& rng, double scale = 1.0) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * rng.gaussian();
    return v;
}

// Dense random symmetric tensor: every multiset coefficient is a standard
// normal draw.
inline SymTensor random_tensor(int n, int d, RngStream& rng, bool normalize = false) {
    SymTensor A(n, d);
    std::vector<std::uint32_t> idx(static_cast<std::size_t>(d), 0);
    // enumerate all non-decreasing tuples
    for (;;) {
        A.set(MultiIndex::from_sorted(std::vector<std::uint32_t>(idx)), rng.gaussian());
        int pos = d - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] + 1 == static_cast<std::uint32_t>(n)) --pos;
        if (pos < 0) break;
        const std::uint32_t v = idx[static_cast<std::size_t>(pos)] + 1;
        for (int q = pos; q < d; ++q) idx[static_cast<std::size_t>(q)] = v;
    }
    if (d == 0) A.set(MultiIndex::from_sorted({}), rng.gaussian());
    return normalize ? A.normalized() : A;
}

}  // namespace ldgauss::testing
