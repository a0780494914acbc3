// Reconstruction metrics (Chamfer-L1 split into completeness and accuracy,
// F-score at a distance threshold) and the neighborhood recall benchmark that
// scores the serialized lookup against exact KNN ground truth across scale
// counts and curve kinds. All nearest-neighbor math is exact brute force.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sfr/core.hpp"
#include "sfr/pyramid.hpp"
#include "sfr/spatial.hpp"

namespace sfr {

// All distances in meters; the paper-style x10^-2 scaling is applied only
// when reports are formatted.
struct ChamferReport {
    double cd = 0.0;
    double completeness = 0.0;  // mean over gt of distance to nearest pred
    double accuracy = 0.0;      // mean over pred of distance to nearest gt
};

namespace detail {

// Exact nearest-neighbor distance from each query to the target set, brute
// force over a flat copy of the targets (the k=1 case of exact_knn, laid out
// so the inner loop vectorizes). Parallel over queries; per-slot writes keep
// results independent of the worker count.
inline std::vector<double> nearest_distances(const std::vector<Vec3>& queries,
                                             const std::vector<Vec3>& targets) {
    const std::size_t m = targets.size();
    std::vector<double> tx(m), ty(m), tz(m);
    for (std::size_t i = 0; i < m; ++i) {
        tx[i] = targets[i].x;
        ty[i] = targets[i].y;
        tz[i] = targets[i].z;
    }
    std::vector<double> out(queries.size());
    parallel_for(queries.size(), [&](std::size_t qi) {
        const double qx = queries[qi].x, qy = queries[qi].y, qz = queries[qi].z;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const double dx = tx[i] - qx;
            const double dy = ty[i] - qy;
            const double dz = tz[i] - qz;
            const double d2 = dx * dx + dy * dy + dz * dz;
            best = d2 < best ? d2 : best;
        }
        out[qi] = std::sqrt(best);
    });
    return out;
}

}  // namespace detail

inline ChamferReport chamfer_l1(const std::vector<Vec3>& pred,
                                const std::vector<Vec3>& gt) {
    if (pred.empty() || gt.empty())
        throw EmptySetError("chamfer distance needs two non-empty point sets");
    const auto d_pred = detail::nearest_distances(pred, gt);
    const auto d_gt = detail::nearest_distances(gt, pred);
    ChamferReport r;
    for (double d : d_pred) r.accuracy += d;
    r.accuracy /= double(pred.size());
    for (double d : d_gt) r.completeness += d;
    r.completeness /= double(gt.size());
    r.cd = 0.5 * (r.accuracy + r.completeness);
    return r;
}

// F = 2PR/(P+R): precision is the fraction of pred within delta of some gt
// point, recall the fraction of gt within delta of some pred point. Matching
// uses <= delta.
inline double fscore(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                     double delta) {
    if (pred.empty() || gt.empty())
        throw EmptySetError("f-score needs two non-empty point sets");
    if (!(delta > 0.0)) throw InvalidSpecError("f-score threshold must be positive");
    const auto d_pred = detail::nearest_distances(pred, gt);
    const auto d_gt = detail::nearest_distances(gt, pred);
    std::size_t hit_p = 0, hit_r = 0;
    for (double d : d_pred) hit_p += d <= delta ? 1 : 0;
    for (double d : d_gt) hit_r += d <= delta ? 1 : 0;
    const double precision = double(hit_p) / double(pred.size());
    const double recall = double(hit_r) / double(gt.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

// rows: extra scale counts 0..S-1; columns: curve kinds.
struct RecallTable {
    std::vector<std::array<double, 2>> values;  // [extra_scales][kHilbert/kMorton]
    int k = 8;
    int window = 16;

    static constexpr int kHilbert = 0;
    static constexpr int kMorton = 1;
};

// Recall of the union of approximate neighborhoods over levels 0..m against
// exact level-0 KNN ground truth, averaged over queries. Retrieved pooled
// points stand in for their level-0 members when intersecting with the
// ground truth. Pyramids for both curve kinds are built internally with
// features disabled.
inline RecallTable recall_benchmark(const PointCloud& cloud, int levels,
                                    double base_pool, const std::vector<Vec3>& queries,
                                    const NeighborQueryConfig& cfg,
                                    CurveParams curve_params = {}) {
    if (cloud.positions.empty()) throw EmptyCloudError("recall benchmark over an empty cloud");
    if (queries.empty()) throw InvalidSpecError("recall benchmark needs queries");

    PyramidOptions opt;
    opt.levels = levels;
    opt.base_pool = base_pool;
    opt.with_features = false;

    RecallTable table;
    table.k = cfg.k;
    table.window = cfg.effective_window();
    table.values.assign(std::size_t(levels), {0.0, 0.0});

    // Ground truth once per query.
    std::vector<std::vector<std::int32_t>> gt(queries.size());
    parallel_for(queries.size(), [&](std::size_t qi) {
        const NeighborSet exact = exact_knn(cloud.positions, queries[qi], cfg.k);
        gt[qi].reserve(exact.entries.size());
        for (const auto& e : exact.entries) gt[qi].push_back(e.index);
        std::sort(gt[qi].begin(), gt[qi].end());
    });

    for (int kind_col = 0; kind_col < 2; ++kind_col) {
        opt.kind = kind_col == RecallTable::kHilbert ? CurveKind::Hilbert
                                                     : CurveKind::Morton;
        PointCloud copy;
        copy.positions = cloud.positions;
        const FeaturePyramid pyr = build_pyramid(std::move(copy), opt, curve_params);

        std::vector<std::vector<double>> per_query(queries.size(),
                                                   std::vector<double>(std::size_t(levels), 0.0));
        parallel_for(queries.size(), [&](std::size_t qi) {
            const Vec3& q = queries[qi];
            std::vector<std::int32_t> retrieved;  // level-0 indices, sorted unique
            for (int m = 0; m < levels; ++m) {
                const PyramidLevel& level = pyr.levels[std::size_t(m)];
                const NeighborSet approx =
                    approx_neighbors(level.index, q, level_query_config(cfg, level));
                for (const auto& e : approx.entries) {
                    if (m == 0) {
                        retrieved.push_back(e.index);
                    } else {
                        const auto& members = level.members[std::size_t(e.index)];
                        retrieved.insert(retrieved.end(), members.begin(), members.end());
                    }
                }
                std::sort(retrieved.begin(), retrieved.end());
                retrieved.erase(std::unique(retrieved.begin(), retrieved.end()),
                                retrieved.end());
                std::vector<std::int32_t> hit;
                std::set_intersection(retrieved.begin(), retrieved.end(),
                                      gt[qi].begin(), gt[qi].end(),
                                      std::back_inserter(hit));
                per_query[qi][std::size_t(m)] =
                    double(hit.size()) / double(gt[qi].size());
            }
        });
        for (int m = 0; m < levels; ++m) {
            double acc = 0.0;
            for (std::size_t qi = 0; qi < queries.size(); ++qi)
                acc += per_query[qi][std::size_t(m)];
            table.values[std::size_t(m)][std::size_t(kind_col)] =
                acc / double(queries.size());
        }
    }
    return table;
}

}  // namespace sfr
