// Serialized spatial index. Points are encoded to curve codes, sorted, and
// neighborhoods are retrieved by searching a fixed window of sorted positions
// around the query's insertion point, then discarding candidates beyond a
// Euclidean cutoff (the false positives of the 1D search).
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "sfr/core.hpp"
#include "sfr/curves.hpp"

namespace sfr {

// Immutable after construction: sorted codes plus the permutation binding the
// curve order back to original point indices. `points` is non-owning; the
// index must not outlive the positions it was built over (nanoflann-style
// adaptor contract).
struct SerializedIndex {
    std::vector<CurveCode> codes;   // non-decreasing
    std::vector<std::int32_t> perm; // sorted position -> original point index
    CurveParams params;
    CurveKind kind = CurveKind::Hilbert;
    const std::vector<Vec3>* points = nullptr;

    std::size_t size() const { return codes.size(); }
    const Vec3& point_at(std::size_t sorted_pos) const {
        return (*points)[std::size_t(perm[sorted_pos])];
    }
};

struct NeighborEntry {
    std::int32_t index = -1;  // original point index
    double distance = 0.0;    // meters

    bool operator==(const NeighborEntry&) const = default;
};

// Entries ascend by (distance, index); ties always break toward the lower
// original index so results are reproducible across runs and thread counts.
struct NeighborSet {
    std::vector<NeighborEntry> entries;
    int k_requested = 0;
};

struct NeighborQueryConfig {
    int k = 8;
    // Half-width of the 1D search in sorted positions; <= 0 means the default
    // of 2k per side.
    int window = 0;
    // Euclidean false-positive cutoff in meters; <= 0 means unbounded here.
    // Pyramid-level queries substitute 8x the level's pooling grid size.
    double r_max = 0.0;

    int effective_window() const { return window > 0 ? window : 2 * k; }
    double effective_r_max() const {
        return r_max > 0.0 ? r_max : std::numeric_limits<double>::infinity();
    }
};

inline SerializedIndex build_index(const std::vector<Vec3>& points,
                                   const CurveParams& params, CurveKind kind) {
    if (points.empty()) throw EmptyCloudError("cannot index an empty point cloud");
    SerializedIndex index;
    index.params = params;
    index.kind = kind;
    index.points = &points;
    index.codes = serialize_points(points, params, kind);

    index.perm.resize(points.size());
    std::iota(index.perm.begin(), index.perm.end(), 0);
    std::sort(index.perm.begin(), index.perm.end(),
              [&codes = index.codes](std::int32_t a, std::int32_t b) {
                  return codes[std::size_t(a)] != codes[std::size_t(b)]
                             ? codes[std::size_t(a)] < codes[std::size_t(b)]
                             : a < b;
              });
    std::vector<CurveCode> sorted(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        sorted[i] = index.codes[std::size_t(index.perm[i])];
    index.codes = std::move(sorted);
    return index;
}

namespace detail {

// Keeps the k smallest (distance, index) pairs seen so far.
struct BoundedNearest {
    explicit BoundedNearest(int k) : k_(std::size_t(std::max(k, 0))) {}

    void offer(double dist, std::int32_t idx) {
        if (k_ == 0) return;
        if (heap_.size() < k_) {
            heap_.emplace_back(dist, idx);
            std::push_heap(heap_.begin(), heap_.end());
        } else if (std::pair<double, std::int32_t>(dist, idx) < heap_.front()) {
            std::pop_heap(heap_.begin(), heap_.end());
            heap_.back() = {dist, idx};
            std::push_heap(heap_.begin(), heap_.end());
        }
    }

    // Worst distance currently retained, or +inf while under capacity.
    double bound() const {
        return heap_.size() < k_ ? std::numeric_limits<double>::infinity()
                                 : heap_.front().first;
    }

    NeighborSet finish(int k_requested) {
        std::sort(heap_.begin(), heap_.end());
        NeighborSet out;
        out.k_requested = k_requested;
        out.entries.reserve(heap_.size());
        for (const auto& [d, i] : heap_) out.entries.push_back({i, d});
        return out;
    }

private:
    std::size_t k_;
    std::vector<std::pair<double, std::int32_t>> heap_;
};

}  // namespace detail

// Approximate neighborhood lookup: candidates are the <= 2*window sorted
// positions bracketing the insertion position of the query's code; candidates
// farther than r_max are discarded and the k nearest survivors returned. May
// return fewer than k entries (including none).
inline NeighborSet approx_neighbors(const SerializedIndex& index, const Vec3& q,
                                    const NeighborQueryConfig& cfg) {
    const CurveCode qcode =
        encode_cell(quantize_clamped(q, index.params), index.params.bits, index.kind);
    const auto begin = index.codes.begin();
    const std::size_t pos =
        std::size_t(std::lower_bound(begin, index.codes.end(), qcode) - begin);

    const std::size_t window = std::size_t(cfg.effective_window());
    const std::size_t lo = pos > window ? pos - window : 0;
    const std::size_t hi = std::min(index.size(), pos + window);
    const double r_max = cfg.effective_r_max();

    detail::BoundedNearest best(cfg.k);
    for (std::size_t s = lo; s < hi; ++s) {
        const std::int32_t orig = index.perm[s];
        const double d = ((*index.points)[std::size_t(orig)] - q).norm();
        if (d <= r_max) best.offer(d, orig);
    }
    return best.finish(cfg.k);
}

// Exact k nearest neighbors by brute force — the ground-truth oracle for the
// approximate lookup. Ties break toward the lower point index.
inline NeighborSet exact_knn(const std::vector<Vec3>& points, const Vec3& q, int k) {
    if (points.empty()) throw EmptyCloudError("exact_knn over an empty point cloud");
    detail::BoundedNearest best(k);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d2 = (points[i] - q).norm2();
        const double b = best.bound();
        if (d2 <= b * b) best.offer(std::sqrt(d2), std::int32_t(i));
    }
    return best.finish(k);
}

// Fraction of the exact neighbor indices recovered by the approximate set.
inline double recall_rate(const NeighborSet& approx, const NeighborSet& exact) {
    if (exact.entries.empty())
        throw ZeroDenominatorError("recall against an empty exact neighbor set");
    std::vector<std::int32_t> a, e;
    a.reserve(approx.entries.size());
    e.reserve(exact.entries.size());
    for (const auto& n : approx.entries) a.push_back(n.index);
    for (const auto& n : exact.entries) e.push_back(n.index);
    std::sort(a.begin(), a.end());
    std::sort(e.begin(), e.end());
    std::vector<std::int32_t> both;
    std::set_intersection(a.begin(), a.end(), e.begin(), e.end(),
                          std::back_inserter(both));
    return double(both.size()) / double(e.size());
}

// Splits the curve order into n contiguous ranges with sizes differing by at
// most one, returning original point indices per segment. Together the
// segments cover the cloud exactly once.
inline std::vector<std::vector<std::int32_t>> partition_segments(
    const SerializedIndex& index, int n_segments) {
    if (n_segments < 1)
        throw InvalidSpecError("n_segments must be >= 1");
    const std::size_t n = index.size();
    const std::size_t segs = std::size_t(n_segments);
    std::vector<std::vector<std::int32_t>> out(segs);
    const std::size_t base = n / segs;
    const std::size_t extra = n % segs;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < segs; ++s) {
        const std::size_t len = base + (s < extra ? 1 : 0);
        out[s].reserve(len);
        for (std::size_t i = 0; i < len; ++i) out[s].push_back(index.perm[pos++]);
    }
    return out;
}

}  // namespace sfr
