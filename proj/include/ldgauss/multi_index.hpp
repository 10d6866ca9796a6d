#pragma once

#include "ldgauss/common.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <vector>

namespace ldgauss {

// Sorted multiset of coordinate indices; identifies one symmetric-tensor
// entry class. Order (= size) may be zero.
class MultiIndex {
public:
    MultiIndex() = default;

    explicit MultiIndex(std::vector<std::uint32_t> entries) : entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end());
    }

    static MultiIndex from_sorted(std::vector<std::uint32_t> entries) {
        MultiIndex m;
        m.entries_ = std::move(entries);
        return m;
    }

    int order() const { return static_cast<int>(entries_.size()); }
    const std::vector<std::uint32_t>& entries() const { return entries_; }
    std::uint32_t max_index() const { return entries_.empty() ? 0 : entries_.back(); }

    // Count of each distinct coordinate, as (coordinate, count) pairs.
    std::vector<std::pair<std::uint32_t, int>> counts() const {
        std::vector<std::pair<std::uint32_t, int>> c;
        for (std::size_t i = 0; i < entries_.size();) {
            std::size_t j = i;
            while (j < entries_.size() && entries_[j] == entries_[i]) ++j;
            c.emplace_back(entries_[i], static_cast<int>(j - i));
            i = j;
        }
        return c;
    }

    // Number of distinct index tuples represented: d! / prod_j c_j!.
    double multiplicity() const {
        double m = factorial(order());
        for (const auto& [coord, cnt] : counts()) m /= factorial(cnt);
        return m;
    }

    // Multiset with one occurrence of `coord` removed (coord must be present).
    MultiIndex without(std::uint32_t coord) const {
        std::vector<std::uint32_t> e;
        e.reserve(entries_.size() - 1);
        bool removed = false;
        for (auto v : entries_) {
            if (!removed && v == coord) {
                removed = true;
                continue;
            }
            e.push_back(v);
        }
        if (!removed) throw precondition_error("MultiIndex::without: coordinate not present");
        return from_sorted(std::move(e));
    }

    MultiIndex with(std::uint32_t coord) const {
        std::vector<std::uint32_t> e = entries_;
        e.insert(std::upper_bound(e.begin(), e.end(), coord), coord);
        return from_sorted(std::move(e));
    }

    auto operator<=>(const MultiIndex&) const = default;

private:
    std::vector<std::uint32_t> entries_;
};

}  // namespace ldgauss
