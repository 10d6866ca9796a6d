#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ldgauss {

// Points are stored as rows; row-major keeps per-point access contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Tensor orders above this are rejected everywhere (factorial tables,
// permutation enumeration and dense oracles all assume it).
inline constexpr int kMaxOrder = 8;

// Dense tuple enumeration (oracles, tensor unfoldings) refuses beyond this.
inline constexpr std::int64_t kDenseGate = 100000;

struct precondition_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct resource_cap_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A condition the analysis guarantees cannot happen did happen; this signals
// a constants or tolerance bug in the library, not a property of the data.
struct internal_inconsistency : std::logic_error {
    using std::logic_error::logic_error;
};

struct eigen_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double factorial(int k) {
    // Exact in double up to 8! = 40320; guarded by kMaxOrder at call sites.
    static constexpr double table[] = {1, 1, 2, 6, 24, 120, 720, 5040, 40320,
                                       362880, 3628800, 39916800, 479001600};
    if (k < 0 || k > 12) throw precondition_error("factorial: out of table range");
    return table[k];
}

inline double binomial(int a, int b) {
    if (b < 0 || b > a) return 0.0;
    double r = 1.0;
    for (int i = 0; i < b; ++i) r = r * static_cast<double>(a - i) / static_cast<double>(i + 1);
    return r;
}

// Number of multisets of size d over n symbols, C(n+d-1, d).
inline std::int64_t multiset_count(int n, int d) {
    double c = binomial(n + d - 1, d);
    return static_cast<std::int64_t>(std::llround(c));
}

inline double sq(double x) { return x * x; }

inline double ipow(double base, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

}  // namespace ldgauss
