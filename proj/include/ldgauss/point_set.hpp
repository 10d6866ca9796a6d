#pragma once

#include "ldgauss/common.hpp"

#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace ldgauss {

// Immutable n-dimensional dataset with index-subset views. The root set owns
// the storage; views share it and never copy rows until gather() is called.
class PointSet {
public:
    PointSet() = default;

    static PointSet own(Matrix pts) {
        if (pts.rows() < 1) throw precondition_error("PointSet: need at least one point");
        PointSet s;
        s.data_ = std::make_shared<const Matrix>(std::move(pts));
        s.idx_.resize(static_cast<std::size_t>(s.data_->rows()));
        std::iota(s.idx_.begin(), s.idx_.end(), std::int64_t{0});
        return s;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(idx_.size()); }
    int dim() const { return data_ ? static_cast<int>(data_->cols()) : 0; }

    auto row(std::int64_t i) const { return data_->row(idx_[static_cast<std::size_t>(i)]); }

    Vector point(std::int64_t i) const { return row(i).transpose(); }

    // Index into the root set's storage.
    std::int64_t root_index(std::int64_t i) const { return idx_[static_cast<std::size_t>(i)]; }

    Vector empirical_mean() const {
        Vector m = Vector::Zero(dim());
        for (std::int64_t i = 0; i < size(); ++i) m += row(i).transpose();
        return m / static_cast<double>(size());
    }

    // View of this view: `local` holds positions in [0, size()).
    PointSet subset(const std::vector<std::int64_t>& local) const {
        if (local.empty()) throw precondition_error("PointSet::subset: empty view");
        PointSet s;
        s.data_ = data_;
        s.idx_.reserve(local.size());
        for (auto i : local) s.idx_.push_back(idx_[static_cast<std::size_t>(i)]);
        return s;
    }

    // Materialize the view as a dense matrix (for BLAS-level operations).
    Matrix gather() const {
        Matrix out(size(), dim());
        for (std::int64_t i = 0; i < size(); ++i) out.row(i) = row(i);
        return out;
    }

private:
    std::shared_ptr<const Matrix> data_;
    std::vector<std::int64_t> idx_;
};

// Worklist item of the decoding pipeline: a subset view plus the fraction of
// it promised to be clean. `stream` seeds branch-local randomness and `path`
// records the split lineage for diagnostics.
struct CandidateSet {
    PointSet points;
    double alpha = 0.0;
    std::uint64_t stream = 1;
    std::string path;
};

inline void validate_candidate(const CandidateSet& c) {
    if (!(c.alpha > 0.0 && c.alpha <= 1.0))
        throw precondition_error("CandidateSet: alpha must be in (0, 1]");
    if (c.points.size() < 1) throw precondition_error("CandidateSet: empty point set");
}

inline double sample_mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs) {
    const double m = sample_mean(xs);
    double s = 0.0;
    for (double x : xs) s += sq(x - m);
    return s / static_cast<double>(xs.size());
}

}  // namespace ldgauss
