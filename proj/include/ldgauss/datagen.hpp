#pragma once

#include "ldgauss/common.hpp"
#include "ldgauss/gmm_model.hpp"
#include "ldgauss/point_set.hpp"
#include "ldgauss/rng.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace ldgauss {

// RNG stream ids (see rng.hpp): direct Gaussian draws and mixture component
// selection use stream 0; mixture component j draws from stream j + 1;
// corruption strategies draw from kStrategyStream.
inline constexpr std::uint64_t kStrategyStream = 0x53545241ull;  // "STRA"

// m i.i.d. draws from N(mu, sigma^2 I).
inline PointSet sample_gaussian(const Vector& mu, double sigma, std::int64_t m, std::uint64_t seed) {
    if (m < 1) throw precondition_error("sample_gaussian: m must be >= 1");
    if (!(sigma > 0.0)) throw precondition_error("sample_gaussian: sigma must be positive");
    const int n = static_cast<int>(mu.size());
    RngStream rng(seed, 0);
    Matrix pts(m, n);
    for (std::int64_t i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) pts(i, j) = mu[j] + sigma * rng.gaussian();
    return PointSet::own(std::move(pts));
}

struct GmmSample {
    PointSet points;
    std::vector<int> labels;  // evaluation only
};

inline GmmSample sample_gmm(const GmmModel& model, std::int64_t m, std::uint64_t seed) {
    model.validate();
    if (m < 1) throw precondition_error("sample_gmm: m must be >= 1");
    const int n = model.dim();
    RngStream select(seed, 0);
    std::vector<RngStream> comp;
    for (int j = 0; j < model.k(); ++j) comp.emplace_back(seed, static_cast<std::uint64_t>(j) + 1);
    Matrix pts(m, n);
    std::vector<int> labels(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        const double u = select.u01();
        double acc = 0.0;
        int j = model.k() - 1;
        for (int c = 0; c < model.k(); ++c) {
            acc += model.components[static_cast<std::size_t>(c)].weight;
            if (u < acc) {
                j = c;
                break;
            }
        }
        const auto& cj = model.components[static_cast<std::size_t>(j)];
        for (int col = 0; col < n; ++col)
            pts(i, col) = cj.mean[col] + cj.sigma * comp[static_cast<std::size_t>(j)].gaussian();
        labels[static_cast<std::size_t>(i)] = j;
    }
    return {PointSet::own(std::move(pts)), std::move(labels)};
}

// Adversarial placements for the corrupted fraction. FarCluster fills a ball
// (uniformly) of the given radius around the offset, so every corrupted
// point is within `spread` of it. LinePlacement drops tight unit-variance
// clusters at multiples of `spacing` along a direction, which is the stress
// case for the two-sided split branch of the filters.
struct FarCluster {
    Vector offset;
    double spread = 1.0;
};
struct MixtureOfGaussians {
    GmmModel model;
};
struct UniformBox {
    double radius = 1.0;
};
struct LinePlacement {
    Vector direction;
    double spacing = 1.0;
    int clusters = 3;
};

using CorruptionStrategy = std::variant<FarCluster, MixtureOfGaussians, UniformBox, LinePlacement>;

struct CorruptedSample {
    PointSet points;
    std::vector<std::uint8_t> clean_mask;  // 1 = clean, aligned with rows
};

namespace detail {

inline Vector uniform_in_ball(int n, double radius, RngStream& rng) {
    Vector dir(n);
    for (int i = 0; i < n; ++i) dir[i] = rng.gaussian();
    const double nrm = dir.norm();
    const double r = radius * std::pow(rng.u01(), 1.0 / static_cast<double>(n));
    return nrm > 0.0 ? Vector(dir * (r / nrm)) : Vector::Zero(n);
}

}  // namespace detail

// Appends (1 - alpha)/alpha corrupted points after the clean ones; total size
// is round(|clean| / alpha) and the mask records provenance. Clean points are
// never modified.
inline CorruptedSample corrupt(const PointSet& clean, double alpha, const CorruptionStrategy& strategy,
                               std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw precondition_error("corrupt: alpha must be in (0, 1]");
    const std::int64_t mc = clean.size();
    const int n = clean.dim();
    const std::int64_t total = static_cast<std::int64_t>(std::llround(static_cast<double>(mc) / alpha));
    const std::int64_t bad = total - mc;
    Matrix pts(total, n);
    for (std::int64_t i = 0; i < mc; ++i) pts.row(i) = clean.row(i);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(total), 0);
    for (std::int64_t i = 0; i < mc; ++i) mask[static_cast<std::size_t>(i)] = 1;

    RngStream rng(seed, kStrategyStream);
    for (std::int64_t i = 0; i < bad; ++i) {
        Vector x(n);
        if (const auto* fc = std::get_if<FarCluster>(&strategy)) {
            if (fc->offset.size() != n) throw precondition_error("corrupt: offset dimension mismatch");
            x = fc->offset + detail::uniform_in_ball(n, fc->spread, rng);
        } else if (const auto* mog = std::get_if<MixtureOfGaussians>(&strategy)) {
            mog->model.validate();
            if (mog->model.dim() != n) throw precondition_error("corrupt: model dimension mismatch");
            const double u = rng.u01();
            double acc = 0.0;
            const GmmComponent* pick = &mog->model.components.back();
            for (const auto& c : mog->model.components) {
                acc += c.weight;
                if (u < acc) {
                    pick = &c;
                    break;
                }
            }
            for (int j = 0; j < n; ++j) x[j] = pick->mean[j] + pick->sigma * rng.gaussian();
        } else if (const auto* ub = std::get_if<UniformBox>(&strategy)) {
            for (int j = 0; j < n; ++j) x[j] = ub->radius * (2.0 * rng.u01() - 1.0);
        } else {
            const auto& lp = std::get<LinePlacement>(strategy);
            if (lp.direction.size() != n) throw precondition_error("corrupt: direction dimension mismatch");
            if (lp.clusters < 1) throw precondition_error("corrupt: need at least one cluster");
            const Vector dir = lp.direction / lp.direction.norm();
            const auto g = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(lp.clusters)));
            x = dir * (lp.spacing * static_cast<double>(g + 1));
            for (int j = 0; j < n; ++j) x[j] += rng.gaussian();
        }
        pts.row(mc + i) = x.transpose();
    }
    return {PointSet::own(std::move(pts)), std::move(mask)};
}

// ---- dataset files ----------------------------------------------------
//
// Text format: a header line "n m" followed by m rows of n reals, written
// with 17 significant digits so doubles round-trip bit-exactly. The mask
// file holds one 0/1 per row.

inline void write_dataset(const std::string& path, const PointSet& pts) {
    std::ofstream out(path);
    if (!out) throw io_error("write_dataset: cannot open " + path);
    out << pts.dim() << ' ' << pts.size() << '\n';
    char buf[64];
    for (std::int64_t i = 0; i < pts.size(); ++i) {
        for (int j = 0; j < pts.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", pts.row(i)[j]);
            if (j > 0) out << ' ';
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw io_error("write_dataset: write failed for " + path);
}

inline PointSet read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_dataset: cannot open " + path);
    std::int64_t n = 0, m = 0;
    if (!(in >> n >> m) || n < 1 || m < 1) throw io_error("read_dataset: bad header in " + path);
    Matrix pts(m, n);
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            if (!(in >> pts(i, j))) throw io_error("read_dataset: truncated data in " + path);
    return PointSet::own(std::move(pts));
}

inline void write_mask(const std::string& path, const std::vector<std::uint8_t>& mask) {
    std::ofstream out(path);
    if (!out) throw io_error("write_mask: cannot open " + path);
    for (auto b : mask) out << static_cast<int>(b) << '\n';
    if (!out) throw io_error("write_mask: write failed for " + path);
}

inline std::vector<std::uint8_t> read_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_mask: cannot open " + path);
    std::vector<std::uint8_t> mask;
    int b = 0;
    while (in >> b) {
        if (b != 0 && b != 1) throw io_error("read_mask: entries must be 0/1 in " + path);
        mask.push_back(static_cast<std::uint8_t>(b));
    }
    return mask;
}

}  // namespace ldgauss
