#pragma once

#include "ldgauss/common.hpp"
#include "ldgauss/datagen.hpp"
#include "ldgauss/gmm_model.hpp"
#include "ldgauss/listdecode.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace ldgauss {

// Required pairwise (normalized) mean separation for the mixture learners:
// S = C (alpha^{-1/(2d)} sqrt(d) (d + log(1/alpha)) log(2 + log(1/alpha))^2
//      + sqrt(log(1/eps))), log base 10 as in the filter thresholds.
struct SeparationSpec {
    double S = 0.0;
};

inline SeparationSpec separation_scale(int d, double alpha, double eps, double C = 10.0) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw precondition_error("separation_scale: bad alpha");
    const double lg = std::log10(1.0 / alpha);
    const double decode_err = std::pow(alpha, -1.0 / (2.0 * d)) * std::sqrt(static_cast<double>(d)) *
                              (static_cast<double>(d) + lg) * sq(std::log10(2.0 + lg));
    const double eps_eff = std::max(eps, 1e-6);
    return {C * (decode_err + std::sqrt(std::log10(1.0 / eps_eff)))};
}

// Sample access abstraction: generators draw fresh points, dataset-backed
// sources hand out sequential chunks of a fixed set.
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual PointSet draw(std::int64_t m) = 0;
    virtual int dim() const = 0;
};

class GmmSampleSource final : public SampleSource {
public:
    GmmSampleSource(GmmModel model, std::uint64_t seed) : model_(std::move(model)), seed_(seed) {
        model_.validate();
    }
    PointSet draw(std::int64_t m) override {
        // One fresh derived seed per draw keeps draws independent.
        const auto s = detail::splitmix64(seed_ ^ (0x64726177ull + static_cast<std::uint64_t>(++calls_)));
        return sample_gmm(model_, m, s).points;
    }
    int dim() const override { return model_.dim(); }

private:
    GmmModel model_;
    std::uint64_t seed_;
    std::uint64_t calls_ = 0;
};

class FixedDataSource final : public SampleSource {
public:
    explicit FixedDataSource(PointSet data) : data_(std::move(data)) {}
    PointSet draw(std::int64_t m) override {
        if (cursor_ + m > data_.size())
            throw precondition_error("FixedDataSource: dataset exhausted; provide more samples");
        std::vector<std::int64_t> idx(static_cast<std::size_t>(m));
        std::iota(idx.begin(), idx.end(), cursor_);
        cursor_ += m;
        return data_.subset(idx);
    }
    int dim() const override { return data_.dim(); }
    std::int64_t remaining() const { return data_.size() - cursor_; }

private:
    PointSet data_;
    std::int64_t cursor_ = 0;
};

struct RobustMeanResult {
    Vector mean;
    double covariance_trace = 0.0;
    int iterations = 0;
};

// Spectral filter for a mostly clean identity-covariance Gaussian: while the
// top covariance eigenvalue exceeds 1 + C_f (eta ln(1/eta) + sqrt(n/m)),
// drop the projected tail above its two-sigma-equivalent quantile. The
// sqrt(n/m) slack covers sampling noise so eta = 0 never filters.
inline RobustMeanResult filter_gaussian_unknown_mean(const PointSet& T, double eta, double cf = 4.0) {
    if (!(eta >= 0.0 && eta < 0.33))
        throw precondition_error("filter_gaussian_unknown_mean: eta must be in [0, 0.33)");
    const int n = T.dim();
    if (T.size() < 100LL * n)
        throw precondition_error("filter_gaussian_unknown_mean: need at least 100 n points");

    std::vector<std::int64_t> live(static_cast<std::size_t>(T.size()));
    std::iota(live.begin(), live.end(), std::int64_t{0});
    const double eta_term = eta > 0.0 ? eta * std::log(1.0 / eta) : 0.0;

    for (std::int64_t round = 0; round <= T.size(); ++round) {
        PointSet cur = T.subset(live);
        const Matrix X = cur.gather();
        const Vector mu = X.colwise().mean().transpose();
        const Matrix centered = X.rowwise() - mu.transpose();
        const Eigen::MatrixXd cov =
            (centered.transpose() * centered) / static_cast<double>(cur.size());
        const auto pairs = selfadjoint_eigenpairs(cov);
        const double lam = pairs.front().value;
        const double threshold =
            1.0 + cf * (eta_term + std::sqrt(static_cast<double>(n) / static_cast<double>(cur.size())));
        if (lam <= threshold)
            return {mu, cov.trace(), static_cast<int>(round)};

        // Cut the projected tail above the Phi(2) quantile; always remove at
        // least the farthest point so the loop makes progress.
        const Vector& v = pairs.front().vector;
        std::vector<double> score(static_cast<std::size_t>(cur.size()));
        for (std::int64_t i = 0; i < cur.size(); ++i)
            score[static_cast<std::size_t>(i)] = std::abs(v.dot(cur.point(i) - mu));
        std::vector<double> sorted_scores(score);
        std::sort(sorted_scores.begin(), sorted_scores.end());
        const auto qidx = static_cast<std::size_t>(
            0.97725 * static_cast<double>(sorted_scores.size() - 1));
        double cut = sorted_scores[qidx];
        if (cut >= sorted_scores.back()) cut = std::nextafter(sorted_scores.back(), 0.0);
        std::vector<std::int64_t> next;
        for (std::int64_t i = 0; i < cur.size(); ++i)
            if (score[static_cast<std::size_t>(i)] <= cut) next.push_back(i);
        if (next.empty() || static_cast<std::int64_t>(next.size()) == cur.size())
            throw resource_cap_error("filter_gaussian_unknown_mean: filtering stalled");
        std::vector<std::int64_t> remapped;
        remapped.reserve(next.size());
        for (auto i : next) remapped.push_back(live[static_cast<std::size_t>(i)]);
        live = std::move(remapped);
        if (static_cast<std::int64_t>(live.size()) < 100LL * n / 2)
            throw resource_cap_error("filter_gaussian_unknown_mean: removed too many points");
    }
    throw resource_cap_error("filter_gaussian_unknown_mean: no convergence");
}

struct GmmLearnParams {
    double C = 10.0;
    std::uint64_t rng_seed = 0;
    std::int64_t m_decode = 0;        // 0: derived from n and d
    std::int64_t m_assoc = 0;         // 0: derived
    std::int64_t decode_subsample = 4000;  // spherical: per-scale decode size
    int scale_stride = 10;            // spherical: thinning inside scale runs
    double filter_cf = 4.0;
    int threads = 1;
};

struct EstimatedComponent {
    double weight = 0.0;
    Vector mean;
    double sigma = 1.0;  // identity learner leaves this at 1
};

struct GmmLearnResult {
    enum class Status { Ok, Fail };
    Status status = Status::Ok;
    std::string message;
    std::vector<EstimatedComponent> components;
    std::vector<std::string> warnings;
    DecodeTrace decode_trace;
    std::int64_t scales_tried = 0;  // spherical only
};

namespace detail {

// Connected components of the direct relation; empty optional when the
// relation is not transitive (some indirect pair is not directly related).
inline std::optional<std::vector<std::vector<int>>> equivalence_classes(
    int N, const std::function<bool(int, int)>& related) {
    std::vector<int> parent(static_cast<std::size_t>(N));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j)
            if (related(i, j)) parent[static_cast<std::size_t>(find(i))] = find(j);
    std::vector<std::vector<int>> classes;
    std::vector<int> root_to_class(static_cast<std::size_t>(N), -1);
    for (int i = 0; i < N; ++i) {
        const int r = find(i);
        if (root_to_class[static_cast<std::size_t>(r)] < 0) {
            root_to_class[static_cast<std::size_t>(r)] = static_cast<int>(classes.size());
            classes.emplace_back();
        }
        classes[static_cast<std::size_t>(root_to_class[static_cast<std::size_t>(r)])].push_back(i);
    }
    for (const auto& cls : classes)
        for (std::size_t a = 0; a < cls.size(); ++a)
            for (std::size_t b = a + 1; b < cls.size(); ++b)
                if (!related(cls[a], cls[b])) return std::nullopt;
    return classes;
}

inline std::int64_t nearest_index(const Vector& x, const std::vector<Vector>& hs) {
    std::int64_t best = 0;
    double bd = (x - hs[0]).squaredNorm();
    for (std::size_t i = 1; i < hs.size(); ++i) {
        const double d2 = (x - hs[i]).squaredNorm();
        if (d2 < bd) {
            bd = d2;
            best = static_cast<std::int64_t>(i);
        }
    }
    return best;
}

}  // namespace detail

// Identity-covariance mixture learner: list-decode, associate fresh samples
// to the nearest hypothesis, keep hypotheses that capture a 2 alpha / 3
// fraction within S/10, cluster the survivors at radius S/3 (an explicit
// equivalence check; failure is a first-class result), then estimate each
// class with the robust mean filter.
inline GmmLearnResult learn_identity_gmm(SampleSource& X, int k, int d, double alpha, double eps,
                                         double tau, const GmmLearnParams& params = {}) {
    if (k < 1) throw precondition_error("learn_identity_gmm: k must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw precondition_error("learn_identity_gmm: bad alpha");
    if (!(eps >= 0.0) || !(alpha > 4.0 * eps))
        throw precondition_error("learn_identity_gmm: requires alpha > 4 eps");
    const int n = X.dim();
    GmmLearnResult res;

    const std::int64_t K = multiset_count(n, d);
    const std::int64_t m_dec = params.m_decode > 0 ? params.m_decode : std::max<std::int64_t>(4000, 150 * K);
    const std::int64_t m_assoc = params.m_assoc > 0 ? params.m_assoc : m_dec;
    if (m_dec < 100 * K)
        res.warnings.push_back("decode sample below the heuristic floor of 100 C(n+d-1,d)");

    const double alpha_dec = std::min(alpha, 0.45);  // decode precondition alpha < 1/2
    DecodeParams dp;
    dp.C = params.C;
    dp.rng_seed = params.rng_seed;
    auto decoded = list_decode_gaussian(X.draw(m_dec), alpha_dec, d, tau / 3.0, dp);
    res.decode_trace = decoded.trace;
    const auto& H = decoded.hypotheses.means;
    if (H.empty()) {
        res.status = GmmLearnResult::Status::Fail;
        res.message = "list decoding produced no hypotheses";
        return res;
    }

    const PointSet Tprime = X.draw(m_assoc);
    std::vector<std::int64_t> assoc(static_cast<std::size_t>(Tprime.size()));
    for (std::int64_t i = 0; i < Tprime.size(); ++i)
        assoc[static_cast<std::size_t>(i)] = detail::nearest_index(Tprime.point(i), H);

    const double S = separation_scale(d, alpha, eps, params.C).S;
    std::vector<std::int64_t> assoc_count(H.size(), 0);
    for (auto a : assoc) ++assoc_count[static_cast<std::size_t>(a)];
    std::vector<int> Hprime;
    for (std::size_t i = 0; i < H.size(); ++i) {
        std::int64_t captured = 0;
        for (std::size_t j = 0; j < H.size(); ++j)
            if ((H[i] - H[j]).norm() <= S / 10.0) captured += assoc_count[j];
        if (static_cast<double>(captured) >= (2.0 * alpha / 3.0) * static_cast<double>(Tprime.size()))
            Hprime.push_back(static_cast<int>(i));
    }
    if (Hprime.empty()) {
        res.status = GmmLearnResult::Status::Fail;
        res.message = "no hypothesis captured a 2 alpha / 3 fraction of the samples";
        return res;
    }

    auto related = [&](int a, int b) {
        return (H[static_cast<std::size_t>(Hprime[static_cast<std::size_t>(a)])] -
                H[static_cast<std::size_t>(Hprime[static_cast<std::size_t>(b)])])
                   .norm() <= S / 3.0;
    };
    const auto classes = detail::equivalence_classes(static_cast<int>(Hprime.size()), related);
    if (!classes) {
        res.status = GmmLearnResult::Status::Fail;
        res.message = "hypothesis clustering is not an equivalence relation; separation assumption violated";
        return res;
    }

    std::vector<int> class_of(H.size(), -1);
    for (std::size_t c = 0; c < classes->size(); ++c)
        for (int member : (*classes)[c]) class_of[static_cast<std::size_t>(Hprime[static_cast<std::size_t>(member)])] = static_cast<int>(c);

    for (std::size_t c = 0; c < classes->size(); ++c) {
        std::vector<std::int64_t> members;
        for (std::int64_t i = 0; i < Tprime.size(); ++i)
            if (class_of[static_cast<std::size_t>(assoc[static_cast<std::size_t>(i)])] == static_cast<int>(c))
                members.push_back(i);
        if (members.empty()) continue;
        EstimatedComponent est;
        est.weight = static_cast<double>(members.size()) / static_cast<double>(Tprime.size());
        const PointSet Tc = Tprime.subset(members);
        const double eta = eps > 0.0 ? std::min(0.32, 1.5 * eps / std::max(est.weight, eps)) : 0.0;
        if (Tc.size() >= 100LL * n) {
            est.mean = filter_gaussian_unknown_mean(Tc, eta, params.filter_cf).mean;
        } else {
            est.mean = Tc.empirical_mean();
            res.warnings.push_back("class too small for the robust mean filter; used the plain mean");
        }
        res.components.push_back(std::move(est));
    }
    return res;
}

// General spherical mixture learner. Builds the candidate scale list from
// recurring pairwise distances, list-decodes the rescaled data per scale,
// filters hypotheses by capture fraction and radius compatibility, clusters
// at radius (s_i + s_j) S / 10, and estimates each class with the robust
// mean filter; sigma comes from the covariance trace.
inline GmmLearnResult learn_spherical_gmm(SampleSource& X, int k, int d, double alpha, double eps,
                                          double tau, const GmmLearnParams& params = {}) {
    if (k < 1) throw precondition_error("learn_spherical_gmm: k must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw precondition_error("learn_spherical_gmm: bad alpha");
    if (!(eps >= 0.0) || !(alpha > 3.0 * eps))
        throw precondition_error("learn_spherical_gmm: requires alpha > 3 eps");
    const int n = X.dim();
    if (static_cast<double>(n) < 4.0 * std::log(1.0 / std::max(tau * alpha, 1e-12)))
        throw precondition_error("learn_spherical_gmm: dimension too low for radius concentration");
    GmmLearnResult res;

    const std::int64_t K = multiset_count(n, d);
    const std::int64_t m_dec = params.m_decode > 0 ? params.m_decode : std::max<std::int64_t>(20000, 150 * K);
    const std::int64_t m_assoc = params.m_assoc > 0 ? params.m_assoc : m_dec;
    const PointSet T = X.draw(m_dec);

    // Candidate squared scales: powers of (1 + 1/(10n)) supported by at
    // least an alpha^2/4 fraction of pairwise distance proxies |x-y|^2/(2n).
    const double step = 1.0 + 1.0 / (10.0 * static_cast<double>(n));
    std::vector<double> proxies;
    {
        const std::int64_t cap = 1500;
        const std::int64_t stride = std::max<std::int64_t>(1, (T.size() + cap - 1) / cap);
        std::vector<std::int64_t> sub;
        for (std::int64_t i = 0; i < T.size(); i += stride) sub.push_back(i);
        for (std::size_t a = 0; a < sub.size(); ++a)
            for (std::size_t b = a + 1; b < sub.size(); ++b) {
                const double d2 = (T.point(sub[a]) - T.point(sub[b])).squaredNorm();
                if (d2 > 0.0) proxies.push_back(d2 / (2.0 * static_cast<double>(n)));
            }
    }
    if (proxies.empty()) {
        res.status = GmmLearnResult::Status::Fail;
        res.message = "no usable pairwise distances";
        return res;
    }
    std::sort(proxies.begin(), proxies.end());
    const auto npairs = static_cast<double>(proxies.size());
    const int j_lo = static_cast<int>(std::floor(std::log(proxies.front() / 2.0) / std::log(step))) - 1;
    const int j_hi = static_cast<int>(std::ceil(std::log(proxies.back() * 2.0) / std::log(step))) + 1;
    std::vector<int> accepted;
    for (int j = j_lo; j <= j_hi; ++j) {
        const double power = std::pow(step, j);
        const auto lo = std::lower_bound(proxies.begin(), proxies.end(), power / 2.0);
        const auto hi = std::upper_bound(proxies.begin(), proxies.end(), power * 2.0);
        if (static_cast<double>(hi - lo) >= (sq(alpha) / 4.0) * npairs) accepted.push_back(j);
    }
    if (accepted.empty()) {
        res.status = GmmLearnResult::Status::Fail;
        res.message = "no recurring distance scale; the sample is too small";
        return res;
    }
    if (static_cast<double>(accepted.size()) > std::ceil(4.0 * n / sq(alpha)))
        throw resource_cap_error("learn_spherical_gmm: distance histogram too flat");

    // Thin runs of consecutive powers: within a run, scales a few steps
    // below sigma^2 still couple with weight exp(-steps/20), so a stride of
    // `scale_stride` keeps the alpha/2 decode promise valid.
    std::vector<double> scales;
    for (std::size_t i = 0; i < accepted.size();) {
        std::size_t j = i;
        while (j + 1 < accepted.size() && accepted[j + 1] == accepted[j] + 1) ++j;
        for (std::size_t t = i; t <= j; t += static_cast<std::size_t>(std::max(params.scale_stride, 1)))
            scales.push_back(std::sqrt(std::pow(step, accepted[t])));
        i = j + 1;
    }
    res.scales_tried = static_cast<std::int64_t>(scales.size());

    // Per-scale decoding on a deterministic subsample of T / s.
    struct Hyp {
        Vector h;
        double s = 1.0;
    };
    std::vector<std::vector<Hyp>> per_scale(scales.size());
    std::vector<std::string> scale_warnings(scales.size());
    const double alpha_dec = std::min(alpha / 2.0, 0.45);
    auto run_scale = [&](std::size_t si) {
        const double s = scales[si];
        const std::int64_t cap = std::max<std::int64_t>(params.decode_subsample, 500);
        const std::int64_t stride = std::max<std::int64_t>(1, (T.size() + cap - 1) / cap);
        std::vector<std::int64_t> sub;
        for (std::int64_t i = 0; i < T.size(); i += stride) sub.push_back(i);
        Matrix pts(static_cast<std::int64_t>(sub.size()), n);
        for (std::size_t i = 0; i < sub.size(); ++i) pts.row(static_cast<std::int64_t>(i)) = T.row(sub[i]) / s;
        DecodeParams dp;
        dp.C = params.C;
        dp.rng_seed = detail::splitmix64(params.rng_seed ^ (0x7363616Cull + si));
        try {
            auto decoded = list_decode_gaussian(PointSet::own(std::move(pts)), alpha_dec, d,
                                                tau / static_cast<double>(scales.size()), dp);
            for (std::size_t h = 0; h < decoded.hypotheses.means.size(); ++h)
                per_scale[si].push_back({s * decoded.hypotheses.means[h], s});
        } catch (const internal_inconsistency& e) {
            // Off-scale decodes can land outside the calibrated regime;
            // skip the scale and record it.
            scale_warnings[si] = std::string("scale skipped: ") + e.what();
        } catch (const resource_cap_error& e) {
            scale_warnings[si] = std::string("scale skipped: ") + e.what();
        }
    };
    const int threads = std::max(params.threads, 1);
    if (threads == 1) {
        for (std::size_t si = 0; si < scales.size(); ++si) run_scale(si);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t si = next.fetch_add(1); si < scales.size(); si = next.fetch_add(1))
                    run_scale(si);
            });
        for (auto& th : pool) th.join();
    }
    std::vector<Hyp> H;
    for (auto& v : per_scale)
        for (auto& h : v) H.push_back(std::move(h));
    for (auto& w : scale_warnings)
        if (!w.empty()) res.warnings.push_back(std::move(w));
    if (H.empty()) {
        res.status = GmmLearnResult::Status::Fail;
        res.message = "no scale produced hypotheses";
        return res;
    }

    // Radius statistic: r(x) is the alpha/2-quantile neighbor distance
    // within U, divided by sqrt(n).
    const auto m_u = static_cast<std::int64_t>(
        std::max(500.0, std::ceil(4.0 * k * std::log(std::max(static_cast<double>(k) / tau, 2.72)) / sq(alpha))));
    const PointSet U = X.draw(m_u);
    std::vector<double> r(static_cast<std::size_t>(U.size()));
    {
        const auto kth = std::max<std::int64_t>(
            1, static_cast<std::int64_t>(std::ceil(alpha / 2.0 * static_cast<double>(U.size() - 1))));
        std::vector<double> dist(static_cast<std::size_t>(U.size() - 1));
        for (std::int64_t i = 0; i < U.size(); ++i) {
            std::size_t w = 0;
            for (std::int64_t j = 0; j < U.size(); ++j)
                if (j != i) dist[w++] = (U.point(i) - U.point(j)).norm();
            std::nth_element(dist.begin(), dist.begin() + (kth - 1), dist.end());
            r[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(kth - 1)] /
                                             std::sqrt(static_cast<double>(n));
        }
    }
    std::vector<Vector> Hmeans;
    Hmeans.reserve(H.size());
    for (const auto& h : H) Hmeans.push_back(h.h);
    std::vector<std::int64_t> u_assoc(static_cast<std::size_t>(U.size()));
    for (std::int64_t i = 0; i < U.size(); ++i)
        u_assoc[static_cast<std::size_t>(i)] = detail::nearest_index(U.point(i), Hmeans);

    const double S = separation_scale(d, alpha, eps, params.C).S;
    std::vector<int> Hprime;
    for (std::size_t i = 0; i < H.size(); ++i) {
        std::int64_t captured = 0;
        for (std::int64_t x = 0; x < U.size(); ++x) {
            const double rx = r[static_cast<std::size_t>(x)];
            if (!(H[i].s / 3.0 <= rx && rx <= 3.0 * H[i].s)) continue;
            const auto& hx = Hmeans[static_cast<std::size_t>(u_assoc[static_cast<std::size_t>(x)])];
            if ((hx - H[i].h).norm() <= H[i].s * S / 10.0) ++captured;
        }
        if (static_cast<double>(captured) >= (4.0 * alpha / 5.0) * static_cast<double>(U.size()))
            Hprime.push_back(static_cast<int>(i));
    }
    if (Hprime.empty()) {
        res.status = GmmLearnResult::Status::Fail;
        res.message = "no hypothesis passed the capture and radius compatibility test";
        return res;
    }

    auto related = [&](int a, int b) {
        const auto& ha = H[static_cast<std::size_t>(Hprime[static_cast<std::size_t>(a)])];
        const auto& hb = H[static_cast<std::size_t>(Hprime[static_cast<std::size_t>(b)])];
        return (ha.h - hb.h).norm() <= (ha.s + hb.s) * S / 10.0;
    };
    const auto classes = detail::equivalence_classes(static_cast<int>(Hprime.size()), related);
    if (!classes) {
        res.status = GmmLearnResult::Status::Fail;
        res.message = "hypothesis clustering is not an equivalence relation; separation assumption violated";
        return res;
    }

    const PointSet Tprime = X.draw(m_assoc);
    std::vector<Vector> prime_means;
    std::vector<int> prime_class(Hprime.size());
    for (std::size_t c = 0; c < classes->size(); ++c)
        for (int member : (*classes)[c]) prime_class[static_cast<std::size_t>(member)] = static_cast<int>(c);
    for (int idx : Hprime) prime_means.push_back(H[static_cast<std::size_t>(idx)].h);

    for (std::size_t c = 0; c < classes->size(); ++c) {
        std::vector<std::int64_t> members;
        for (std::int64_t i = 0; i < Tprime.size(); ++i) {
            const auto nearest = detail::nearest_index(Tprime.point(i), prime_means);
            if (prime_class[static_cast<std::size_t>(nearest)] == static_cast<int>(c)) members.push_back(i);
        }
        if (members.empty()) continue;
        EstimatedComponent est;
        est.weight = static_cast<double>(members.size()) / static_cast<double>(Tprime.size());

        std::vector<double> class_scales;
        for (int member : (*classes)[c])
            class_scales.push_back(H[static_cast<std::size_t>(Hprime[static_cast<std::size_t>(member)])].s);
        std::sort(class_scales.begin(), class_scales.end());
        const double s_ref = class_scales[class_scales.size() / 2];

        PointSet Tc = Tprime.subset(members);
        Matrix scaled = Tc.gather() / s_ref;
        const PointSet Tc_scaled = PointSet::own(std::move(scaled));
        const double eta = eps > 0.0 ? std::min(0.32, 1.5 * eps / std::max(est.weight, eps)) : 0.0;
        if (Tc_scaled.size() >= 100LL * n) {
            const auto rm = filter_gaussian_unknown_mean(Tc_scaled, eta, params.filter_cf);
            est.mean = s_ref * rm.mean;
            est.sigma = s_ref * std::sqrt(rm.covariance_trace / static_cast<double>(n));
        } else {
            const Matrix Xc = Tc_scaled.gather();
            const Vector mu = Xc.colwise().mean().transpose();
            const Matrix centered = Xc.rowwise() - mu.transpose();
            est.mean = s_ref * mu;
            est.sigma = s_ref * std::sqrt((centered.squaredNorm() / static_cast<double>(Tc_scaled.size())) /
                                          static_cast<double>(n));
            res.warnings.push_back("class too small for the robust mean filter; used plain estimates");
        }
        res.components.push_back(std::move(est));
    }
    if (res.components.empty()) {
        res.status = GmmLearnResult::Status::Fail;
        res.message = "no class captured any associated samples";
    }
    return res;
}

// ---- dimension reduction ------------------------------------------------

struct AffineSubspace {
    Vector origin;
    Eigen::MatrixXd basis;  // orthonormal columns

    int dim() const { return static_cast<int>(basis.cols()); }
    Vector project(const Vector& x) const {
        if (basis.cols() == 0) return origin;
        return origin + basis * (basis.transpose() * (x - origin));
    }
    double residual(const Vector& x) const { return (x - project(x)).norm(); }
};

// Empirical mean plus the top k-1 covariance eigenvectors.
inline AffineSubspace pca_subspace(const PointSet& C, int k) {
    if (k < 1) throw precondition_error("pca_subspace: k must be >= 1");
    if (C.size() < k) throw precondition_error("pca_subspace: need at least k points");
    const int n = C.dim();
    const Matrix X = C.gather();
    const Vector mu = X.colwise().mean().transpose();
    AffineSubspace W;
    W.origin = mu;
    if (k == 1) {
        W.basis = Eigen::MatrixXd::Zero(n, 0);
        return W;
    }
    const Matrix centered = X.rowwise() - mu.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(C.size());
    const auto pairs = selfadjoint_eigenpairs(cov);  // covers degenerate spectra too
    const int take = std::min(k - 1, n);
    W.basis = Eigen::MatrixXd(n, take);
    for (int i = 0; i < take; ++i) W.basis.col(i) = pairs[static_cast<std::size_t>(i)].vector;
    return W;
}

// Splits the sample by nearest-neighbor radius r(x) = min_y |x - y| / sqrt(n)
// into multiplicative bands (transitive closure of the (1 +- n^{-1/3})
// relation, computed by chaining sorted radii), runs a per-class PCA, and
// returns the affine span. Below the triviality floor n <= k^2 the full
// space is returned, so the output dimension never exceeds k^2.
inline AffineSubspace dimension_reduce(const PointSet& U, int k, double eps) {
    if (k < 1) throw precondition_error("dimension_reduce: k must be >= 1");
    (void)eps;  // accuracy enters through the caller's sample size
    const int n = U.dim();
    if (n <= k * k) {
        AffineSubspace full;
        full.origin = Vector::Zero(n);
        full.basis = Eigen::MatrixXd::Identity(n, n);
        return full;
    }
    if (U.size() < 2 * k) throw precondition_error("dimension_reduce: not enough points");

    // Radii against a bounded reference subsample (BLAS pairwise distances).
    constexpr std::int64_t kRefCap = 2048;
    const std::int64_t stride = std::max<std::int64_t>(1, (U.size() + kRefCap - 1) / kRefCap);
    std::vector<std::int64_t> ref;
    for (std::int64_t i = 0; i < U.size(); i += stride) ref.push_back(i);
    const Matrix Xall = U.gather();
    Matrix Xref(static_cast<std::int64_t>(ref.size()), n);
    for (std::size_t i = 0; i < ref.size(); ++i) Xref.row(static_cast<std::int64_t>(i)) = U.row(ref[i]);
    const Vector all_sq = Xall.rowwise().squaredNorm();
    const Vector ref_sq = Xref.rowwise().squaredNorm();
    const Matrix cross = Xall * Xref.transpose();
    std::vector<double> radius(static_cast<std::size_t>(U.size()));
    for (std::int64_t i = 0; i < U.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < ref.size(); ++j) {
            const double d2 = all_sq[i] + ref_sq[static_cast<std::int64_t>(j)] -
                              2.0 * cross(i, static_cast<std::int64_t>(j));
            if (d2 > 1e-18 && d2 < best) best = d2;
        }
        radius[static_cast<std::size_t>(i)] = std::sqrt(std::max(best, 0.0) / static_cast<double>(n));
    }

    // Bands over the reference radii.
    std::vector<double> ref_radii;
    for (auto i : ref) ref_radii.push_back(radius[static_cast<std::size_t>(i)]);
    std::sort(ref_radii.begin(), ref_radii.end());
    const double band = std::pow(static_cast<double>(n), -1.0 / 3.0);
    struct Band {
        double lo, hi;
    };
    std::vector<Band> bands;
    for (std::size_t i = 0; i < ref_radii.size();) {
        std::size_t j = i;
        while (j + 1 < ref_radii.size() && ref_radii[j + 1] <= ref_radii[j] * (1.0 + band)) ++j;
        bands.push_back({ref_radii[i], ref_radii[j]});
        i = j + 1;
    }

    auto band_of = [&](double rx) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < bands.size(); ++b) {
            if (rx >= bands[b].lo / (1.0 + band) && rx <= bands[b].hi * (1.0 + band)) return static_cast<int>(b);
            const double mid = 0.5 * (std::log(std::max(bands[b].lo, 1e-300)) +
                                      std::log(std::max(bands[b].hi, 1e-300)));
            const double dist = std::abs(std::log(std::max(rx, 1e-300)) - mid);
            if (dist < bd) {
                bd = dist;
                best = static_cast<int>(b);
            }
        }
        return best;
    };
    std::vector<std::vector<std::int64_t>> classes(bands.size());
    for (std::int64_t i = 0; i < U.size(); ++i)
        classes[static_cast<std::size_t>(band_of(radius[static_cast<std::size_t>(i)]))].push_back(i);

    // Keep the k largest classes (ties by band order); any extra bands are
    // radius-noise slivers.
    std::vector<std::size_t> order(classes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (classes[a].size() != classes[b].size()) return classes[a].size() > classes[b].size();
        return a < b;
    });
    if (static_cast<int>(order.size()) > k) order.resize(static_cast<std::size_t>(k));
    std::sort(order.begin(), order.end());

    std::vector<AffineSubspace> parts;
    for (auto c : order) {
        if (static_cast<std::int64_t>(classes[c].size()) < std::max<std::int64_t>(k, 2)) continue;
        parts.push_back(pca_subspace(U.subset(classes[c]), k));
    }
    if (parts.empty()) throw precondition_error("dimension_reduce: no class has enough points");

    AffineSubspace W;
    W.origin = parts[0].origin;
    std::vector<Vector> dirs;
    for (std::size_t p = 1; p < parts.size(); ++p) dirs.push_back(parts[p].origin - W.origin);
    for (const auto& part : parts)
        for (int c = 0; c < part.basis.cols(); ++c) dirs.push_back(part.basis.col(c));
    Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(dirs.size()));
    int cols = 0;
    for (auto& dir : dirs) {
        Vector v = dir;
        for (int c = 0; c < cols; ++c) v -= basis.col(c) * basis.col(c).dot(v);
        for (int c = 0; c < cols; ++c) v -= basis.col(c) * basis.col(c).dot(v);  // re-orthogonalize
        if (v.norm() <= 1e-10) continue;
        basis.col(cols++) = v / v.norm();
    }
    W.basis = basis.leftCols(cols);
    return W;
}

// ---- evaluation ----------------------------------------------------------

struct MatchedErrors {
    std::vector<int> permutation;  // estimate index assigned to each truth index
    std::vector<double> weight_err;
    std::vector<double> mean_err;   // ||nu - mu|| / sigma
    std::vector<double> sigma_err;  // sqrt(n) |s - sigma| / sigma
};

// Optimal assignment (minimum total mean distance) by exhaustive search;
// k is small here and exactness beats cleverness.
inline MatchedErrors match_components(const std::vector<EstimatedComponent>& est, const GmmModel& truth) {
    const int k = truth.k();
    if (static_cast<int>(est.size()) != k)
        throw precondition_error("match_components: component count mismatch");
    if (k > 10) throw precondition_error("match_components: k too large for exhaustive matching");
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (int i = 0; i < k; ++i)
            cost += (est[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])].mean -
                     truth.components[static_cast<std::size_t>(i)].mean)
                        .norm();
        if (cost < best_cost) {
            best_cost = cost;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    MatchedErrors out;
    out.permutation = best;
    const auto n = static_cast<double>(truth.dim());
    for (int i = 0; i < k; ++i) {
        const auto& e = est[static_cast<std::size_t>(best[static_cast<std::size_t>(i)])];
        const auto& t = truth.components[static_cast<std::size_t>(i)];
        out.weight_err.push_back(std::abs(e.weight - t.weight));
        out.mean_err.push_back((e.mean - t.mean).norm() / t.sigma);
        out.sigma_err.push_back(std::sqrt(n) * std::abs(e.sigma - t.sigma) / t.sigma);
    }
    return out;
}

}  // namespace ldgauss
