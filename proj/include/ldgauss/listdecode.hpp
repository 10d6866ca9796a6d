#pragma once

#include "ldgauss/common.hpp"
#include "ldgauss/multifilter.hpp"
#include "ldgauss/point_set.hpp"

#include <cmath>
#include <deque>
#include <string>
#include <vector>

namespace ldgauss {

struct HypothesisList {
    std::vector<Vector> means;
    std::vector<std::string> provenance;  // worklist branch path per hypothesis

    std::int64_t size() const { return static_cast<std::int64_t>(means.size()); }

    void push(Vector v, std::string path) {
        for (const auto& h : means)
            if ((h - v).norm() < 1e-12) return;  // exact duplicate
        means.push_back(std::move(v));
        provenance.push_back(std::move(path));
    }
};

// Greedy ball cover: x becomes a center when at least an alpha-fraction of
// points lies within R = 2C sqrt(n) of it and no center is within 3R; the
// returned subsets are the 3R-balls around centers. Center candidates and
// neighbor counts run on a deterministic stride subsample (a full quadratic
// scan is infeasible at large m); since the R-balls around centers are
// disjoint and each holds an alpha-fraction of the subsample, the output
// size stays bounded by 1/alpha exactly.
inline std::vector<PointSet> naive_clustering(const PointSet& T, double alpha, double C) {
    if (!(alpha > 0.0 && alpha <= 0.5))
        throw precondition_error("naive_clustering: alpha must be in (0, 1/2]");
    if (alpha * static_cast<double>(T.size()) < 1.0)
        throw precondition_error("naive_clustering: alpha |T| is below one point");
    const std::int64_t m = T.size();
    const double R = 2.0 * C * std::sqrt(static_cast<double>(T.dim()));

    constexpr std::int64_t kSubsampleCap = 4096;
    const std::int64_t stride = std::max<std::int64_t>(1, (m + kSubsampleCap - 1) / kSubsampleCap);
    std::vector<std::int64_t> sub;
    for (std::int64_t i = 0; i < m; i += stride) sub.push_back(i);
    const double need = alpha * static_cast<double>(sub.size());

    std::vector<Vector> centers;
    for (const auto ci : sub) {
        const Vector x = T.point(ci);
        bool covered = false;
        for (const auto& c : centers)
            if ((x - c).norm() <= 3.0 * R) {
                covered = true;
                break;
            }
        if (covered) continue;
        std::int64_t cnt = 0;
        for (const auto qi : sub)
            if ((T.point(qi) - x).norm() <= R) ++cnt;
        if (static_cast<double>(cnt) + 1e-9 >= need) centers.push_back(x);
    }

    std::vector<PointSet> out;
    for (const auto& c : centers) {
        std::vector<std::int64_t> keep;
        for (std::int64_t i = 0; i < m; ++i)
            if ((T.point(i) - c).norm() <= 3.0 * R) keep.push_back(i);
        if (!keep.empty()) out.push_back(T.subset(keep));
    }
    return out;
}

struct DecodeTrace {
    FilterTrace filter;
    std::int64_t subroutine_calls = 0;
    std::int64_t vectors = 0;
    std::int64_t dropped_small = 0;   // subsets below min_subset
    std::int64_t max_worklist = 0;    // live-candidate watermark
    std::int64_t raw_hypotheses = 0;  // before list reduction
};

struct DecodeParams {
    double C = 10.0;
    std::uint64_t rng_seed = 0;
    std::int64_t max_subroutine_calls = 1000000;
    double worklist_slack = 4.0;  // live candidates stay below slack / alpha^3
    std::int64_t min_subset = 0;  // 0: use max(50, ceil(2/alpha))
};

// Defaults for the final list reduction: beta tracks the decode error scale
// alpha^{-1/(2d)} sqrt(d); delta and t follow 1/(C ln(1/alpha)) and
// sqrt(ln(C ln(1/alpha))); delta is additionally capped at 1/(3 |M|) so the
// kept list is never longer than 1.5 / alpha.
struct ListReductionDefaults {
    double beta = 0.0;
    double delta = 0.0;
    double t = 0.0;
};

inline ListReductionDefaults list_reduction_defaults(double alpha, int d, double C) {
    ListReductionDefaults r;
    r.beta = std::pow(alpha, -1.0 / (2.0 * d)) * std::sqrt(static_cast<double>(d));
    const double ln_inv = std::log(1.0 / alpha);
    r.delta = 1.0 / (C * ln_inv);
    r.t = std::sqrt(std::log(std::max(C * ln_inv, 1.01)));
    return r;
}

// Appendix-style pruning: keep hypotheses whose slab intersection
//   T_i = cap_{j != i} { X : |v_ij . (X - mu_i)| < beta + t }
// retains at least alpha (1 - delta N) |T| points, dropping any candidate
// within 2(beta + t) of an already kept one. Processing best-supported
// first keeps the representative with the most sample mass.
inline HypothesisList list_reduction(const HypothesisList& M, const PointSet& T, double alpha,
                                     double beta, double delta, double t) {
    const std::int64_t N = M.size();
    if (N == 0) return {};
    if (N > 1000) throw resource_cap_error("list_reduction: hypothesis list too large");
    const double delta_eff = std::min(delta, 1.0 / (3.0 * static_cast<double>(N)));
    const double width = beta + t;

    std::vector<std::int64_t> support(static_cast<std::size_t>(N), 0);
    for (std::int64_t x = 0; x < T.size(); ++x) {
        const Vector p = T.point(x);
        for (std::int64_t i = 0; i < N; ++i) {
            bool inside = true;
            for (std::int64_t j = 0; j < N && inside; ++j) {
                if (j == i) continue;
                Vector dir = M.means[static_cast<std::size_t>(i)] - M.means[static_cast<std::size_t>(j)];
                const double nrm = dir.norm();
                if (nrm < 1e-12) continue;
                dir /= nrm;
                inside = std::abs(dir.dot(p - M.means[static_cast<std::size_t>(i)])) < width;
            }
            if (inside) ++support[static_cast<std::size_t>(i)];
        }
    }

    std::vector<std::int64_t> order(static_cast<std::size_t>(N));
    for (std::int64_t i = 0; i < N; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        if (support[static_cast<std::size_t>(a)] != support[static_cast<std::size_t>(b)])
            return support[static_cast<std::size_t>(a)] > support[static_cast<std::size_t>(b)];
        return a < b;
    });

    const double need = alpha * (1.0 - delta_eff * static_cast<double>(N)) * static_cast<double>(T.size());
    HypothesisList kept;
    for (const auto i : order) {
        if (static_cast<double>(support[static_cast<std::size_t>(i)]) < need) continue;
        bool close = false;
        for (const auto& h : kept.means)
            if ((h - M.means[static_cast<std::size_t>(i)]).norm() < 2.0 * width) {
                close = true;
                break;
            }
        if (!close)
            kept.push(M.means[static_cast<std::size_t>(i)], M.provenance[static_cast<std::size_t>(i)]);
    }
    return kept;
}

struct DecodeResult {
    HypothesisList hypotheses;
    DecodeTrace trace;
};

// Worklist driver: seed with the naive clusters at alpha/2, repeatedly run
// the main subroutine (FIFO), collect certified means, requeue splits, and
// reduce the final list.
inline DecodeResult list_decode_gaussian(const PointSet& T, double alpha, int d, double tau,
                                         const DecodeParams& params = {}) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw precondition_error("list_decode_gaussian: alpha must be in (0, 1/2)");
    const std::int64_t min_subset =
        params.min_subset > 0
            ? params.min_subset
            : std::max<std::int64_t>(50, static_cast<std::int64_t>(std::ceil(2.0 / alpha)));
    if (T.size() < std::max<std::int64_t>(min_subset, static_cast<std::int64_t>(std::ceil(1.0 / alpha))))
        throw precondition_error("list_decode_gaussian: input set too small");

    DecodeResult res;
    const auto clusters = naive_clustering(T, alpha, params.C);
    std::deque<CandidateSet> work;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        CandidateSet c;
        c.points = clusters[i];
        c.alpha = alpha / 2.0;
        c.stream = detail::splitmix64(0x5345454Dull ^ (static_cast<std::uint64_t>(i) + 1));
        c.path = std::to_string(i);
        work.push_back(std::move(c));
    }
    const double watermark_bound = params.worklist_slack / ipow(alpha, 3);

    FilterParams fp;
    fp.C = params.C;
    fp.d = d;
    fp.tau = std::max(tau / static_cast<double>(T.size()), 1e-300);
    fp.rng_seed = params.rng_seed;
    fp.min_subset = min_subset;

    HypothesisList raw;
    while (!work.empty()) {
        res.trace.max_worklist = std::max(res.trace.max_worklist, static_cast<std::int64_t>(work.size()));
        if (static_cast<double>(work.size()) > watermark_bound)
            throw internal_inconsistency("list_decode_gaussian: worklist exceeded the potential bound");
        CandidateSet cur = std::move(work.front());
        work.pop_front();
        if (cur.points.size() < min_subset) {
            ++res.trace.dropped_small;
            continue;
        }
        if (++res.trace.subroutine_calls > params.max_subroutine_calls)
            throw resource_cap_error("list_decode_gaussian: subroutine call cap exceeded");
        auto out = main_subroutine(cur, fp, &res.trace.filter);
        switch (out.kind) {
            case MultifilterOutcome::Kind::Vector:
                ++res.trace.vectors;
                raw.push(std::move(out.mean), cur.path);
                break;
            case MultifilterOutcome::Kind::Split:
                for (auto& part : out.parts) work.push_back(std::move(part));
                break;
            default:
                break;  // No: drop the branch
        }
    }
    res.trace.raw_hypotheses = raw.size();

    const auto defs = list_reduction_defaults(alpha, d, params.C);
    res.hypotheses = list_reduction(raw, T, alpha, defs.beta, defs.delta, defs.t);
    return res;
}

}  // namespace ldgauss
