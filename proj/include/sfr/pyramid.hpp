// Multi-level point hierarchy. Level 0 is the input cloud; level s > 0 pools
// level 0 on a grid of size base_pool * 2^(s-1) (pooled position = centroid,
// pooled feature = mean). Every level carries a serialized index built with
// the same fine curve parameters, so neighborhood lookups stay collision-free
// across scales.
//
// Per-point features are analytic local geometry (plane fit over exact
// nearest neighbors) rather than a learned backbone: normal, neighborhood
// centroid offset, mean neighbor distance, and the plane-fit residual (D=8).
#pragma once

#include <Eigen/Eigenvalues>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "sfr/core.hpp"
#include "sfr/curves.hpp"
#include "sfr/spatial.hpp"

namespace sfr {

struct PointCloud {
    std::vector<Vec3> positions;
    std::vector<std::vector<double>> features;  // empty or N x D
    std::vector<Vec3> normals;                  // empty or N unit vectors
    std::vector<std::uint8_t> degenerate;       // empty or N flags from the plane fit

    std::size_t size() const { return positions.size(); }
    bool has_features() const { return !features.empty(); }
    bool has_normals() const { return !normals.empty(); }
    int feature_dim() const { return features.empty() ? 0 : int(features[0].size()); }
};

inline constexpr int kLocalFeatureDim = 8;

struct PyramidLevel {
    PointCloud cloud;
    SerializedIndex index;
    double pool_size = 0.0;
    // Level-0 point indices pooled into each point of this level; empty on
    // level 0 where the mapping is the identity.
    std::vector<std::vector<std::int32_t>> members;
};

struct FeaturePyramid {
    std::vector<PyramidLevel> levels;
    CurveParams curve_params;
    CurveKind kind = CurveKind::Hilbert;
    double base_pool = 0.02;

    std::size_t level_count() const { return levels.size(); }
};

struct PyramidOptions {
    int levels = 4;
    double base_pool = 0.02;
    CurveKind kind = CurveKind::Hilbert;
    // Estimate local-geometry features on level 0 when the cloud has none.
    bool with_features = true;
    int feature_k = 16;
};

namespace detail {

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& c) const {
        std::uint64_t h = std::uint64_t(c.x) * 0x9e3779b97f4a7c15ull;
        h ^= std::uint64_t(c.y) * 0xc2b2ae3d27d4eb4full + (h << 6);
        h ^= std::uint64_t(c.z) * 0x165667b19e3779f9ull + (h >> 3);
        return std::size_t(h);
    }
};

inline CellKey pooling_cell(const Vec3& p, const Vec3& origin, double cell) {
    return {std::int64_t(std::floor((p.x - origin.x) / cell)),
            std::int64_t(std::floor((p.y - origin.y) / cell)),
            std::int64_t(std::floor((p.z - origin.z) / cell))};
}

}  // namespace detail

// Plane-fit features over the k exact nearest neighbors of every point (the
// point itself included). Rank-deficient neighborhoods (fewer than two
// independent in-plane directions) get a zero normal and a degenerate flag
// instead of an error. Normal signs are made globally consistent per
// connected component by propagation along a minimum-flip spanning tree of
// the neighbor graph, seeded at the component's topmost point oriented +z.
inline PointCloud estimate_local_geometry(const PointCloud& cloud, int k) {
    const std::size_t n = cloud.size();
    if (k < 3) throw InvalidSpecError("local geometry needs k >= 3");
    if (n <= std::size_t(k))
        throw InvalidSpecError("local geometry needs more points than neighbors");

    PointCloud out = cloud;
    out.features.assign(n, std::vector<double>(kLocalFeatureDim, 0.0));
    out.normals.assign(n, Vec3{});
    out.degenerate.assign(n, 0);

    std::vector<NeighborSet> hoods(n);
    parallel_for(n, [&](std::size_t i) {
        hoods[i] = exact_knn(cloud.positions, cloud.positions[i], k);
    });

    parallel_for(n, [&](std::size_t i) {
        const auto& nbrs = hoods[i].entries;
        Vec3 centroid{};
        for (const auto& nb : nbrs) centroid += cloud.positions[std::size_t(nb.index)];
        centroid = centroid / double(nbrs.size());

        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto& nb : nbrs) {
            const Vec3 d = cloud.positions[std::size_t(nb.index)] - centroid;
            const Eigen::Vector3d v(d.x, d.y, d.z);
            cov += v * v.transpose();
        }
        cov /= double(nbrs.size());

        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
        const double lambda_n = std::max(evals[0], 0.0);
        const double lambda_mid = std::max(evals[1], 0.0);
        const double lambda_max = std::max(evals[2], 0.0);

        Vec3 normal{};
        bool degenerate = lambda_mid <= 1e-12 * std::max(lambda_max, 1e-300);
        if (!degenerate) {
            const Eigen::Vector3d nv = eig.eigenvectors().col(0);
            normal = Vec3{nv[0], nv[1], nv[2]}.normalized();
        }

        double mean_dist = 0.0;
        for (const auto& nb : nbrs) mean_dist += nb.distance;
        mean_dist /= double(nbrs.size());

        const Vec3 offset = centroid - cloud.positions[i];
        auto& f = out.features[i];
        f[0] = normal.x;
        f[1] = normal.y;
        f[2] = normal.z;
        f[3] = offset.x;
        f[4] = offset.y;
        f[5] = offset.z;
        f[6] = mean_dist;
        f[7] = std::sqrt(lambda_n);  // plane-fit residual
        out.normals[i] = normal;
        out.degenerate[i] = degenerate ? 1 : 0;
    });

    // Orientation propagation (Hoppe-style): Prim over the neighbor graph with
    // edge weight 1 - |n_i . n_j|, flipping as we go.
    std::vector<std::uint8_t> visited(n, 0);
    std::vector<double> cost(n, std::numeric_limits<double>::infinity());
    std::vector<std::int32_t> parent(n, -1);
    using QEntry = std::pair<double, std::int32_t>;
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> queue;

    // Symmetrized adjacency.
    std::vector<std::vector<std::int32_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& nb : hoods[i].entries)
            if (nb.index != std::int32_t(i)) {
                adj[i].push_back(nb.index);
                adj[std::size_t(nb.index)].push_back(std::int32_t(i));
            }

    std::size_t remaining = n;
    while (remaining > 0) {
        // Seed each component at its topmost point, oriented upward.
        std::int32_t seed = -1;
        double best_z = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i)
            if (!visited[i] && cloud.positions[i].z > best_z) {
                best_z = cloud.positions[i].z;
                seed = std::int32_t(i);
            }
        if (out.normals[std::size_t(seed)].z < 0.0)
            out.normals[std::size_t(seed)] = -out.normals[std::size_t(seed)];
        cost[std::size_t(seed)] = 0.0;
        queue.emplace(0.0, seed);

        while (!queue.empty()) {
            const auto [c, i] = queue.top();
            queue.pop();
            if (visited[std::size_t(i)]) continue;
            visited[std::size_t(i)] = 1;
            --remaining;
            if (parent[std::size_t(i)] >= 0) {
                const Vec3& np = out.normals[std::size_t(parent[std::size_t(i)])];
                if (np.dot(out.normals[std::size_t(i)]) < 0.0) {
                    out.normals[std::size_t(i)] = -out.normals[std::size_t(i)];
                    auto& f = out.features[std::size_t(i)];
                    f[0] = -f[0];
                    f[1] = -f[1];
                    f[2] = -f[2];
                }
            }
            for (std::int32_t j : adj[std::size_t(i)]) {
                if (visited[std::size_t(j)]) continue;
                const double w =
                    1.0 - std::abs(out.normals[std::size_t(i)].dot(out.normals[std::size_t(j)]));
                if (w < cost[std::size_t(j)]) {
                    cost[std::size_t(j)] = w;
                    parent[std::size_t(j)] = i;
                    queue.emplace(w, j);
                }
            }
        }
    }
    return out;
}

// Builds the S-level hierarchy. The serialization origin is fitted to the
// input cloud once and shared by every level (pooled centroids stay inside the
// level-0 bounds). Level 0 gets pool_size base_pool/2 so sizes double exactly
// down the list.
inline FeaturePyramid build_pyramid(PointCloud cloud, const PyramidOptions& opt,
                                    CurveParams curve_params = {}) {
    if (cloud.positions.empty()) throw EmptyCloudError("cannot build a pyramid over an empty cloud");
    if (opt.levels < 1) throw InvalidSpecError("pyramid needs at least one level");

    if (!cloud.has_features() && opt.with_features)
        cloud = estimate_local_geometry(cloud, opt.feature_k);

    FeaturePyramid pyr;
    pyr.base_pool = opt.base_pool;
    pyr.kind = opt.kind;
    pyr.curve_params = curve_params;
    pyr.curve_params.origin = Aabb::of_points(cloud.positions).lo;

    pyr.levels.resize(std::size_t(opt.levels));
    pyr.levels[0].cloud = std::move(cloud);
    pyr.levels[0].pool_size = opt.base_pool * 0.5;

    const PointCloud& base = pyr.levels[0].cloud;
    const Vec3 origin = pyr.curve_params.origin;
    for (int s = 1; s < opt.levels; ++s) {
        PyramidLevel& level = pyr.levels[std::size_t(s)];
        level.pool_size = opt.base_pool * double(std::int64_t(1) << (s - 1));

        std::unordered_map<detail::CellKey, std::size_t, detail::CellKeyHash> cells;
        for (std::size_t i = 0; i < base.size(); ++i) {
            const auto key = detail::pooling_cell(base.positions[i], origin, level.pool_size);
            auto [it, inserted] = cells.try_emplace(key, level.members.size());
            if (inserted) level.members.emplace_back();
            level.members[it->second].push_back(std::int32_t(i));
        }

        const int d = base.feature_dim();
        level.cloud.positions.resize(level.members.size());
        if (d > 0) level.cloud.features.assign(level.members.size(), std::vector<double>(std::size_t(d), 0.0));
        for (std::size_t c = 0; c < level.members.size(); ++c) {
            Vec3 centroid{};
            for (std::int32_t i : level.members[c]) centroid += base.positions[std::size_t(i)];
            level.cloud.positions[c] = centroid / double(level.members[c].size());
            if (d > 0) {
                auto& f = level.cloud.features[c];
                for (std::int32_t i : level.members[c])
                    for (int j = 0; j < d; ++j) f[std::size_t(j)] += base.features[std::size_t(i)][std::size_t(j)];
                for (int j = 0; j < d; ++j) f[std::size_t(j)] /= double(level.members[c].size());
            }
        }
    }

    for (auto& level : pyr.levels)
        level.index = build_index(level.cloud.positions, pyr.curve_params, pyr.kind);
    return pyr;
}

// r_max convention for level queries: 8x the level's pooling grid size unless
// the caller pinned an explicit cutoff.
inline NeighborQueryConfig level_query_config(const NeighborQueryConfig& base,
                                              const PyramidLevel& level) {
    NeighborQueryConfig cfg = base;
    if (cfg.r_max <= 0.0) cfg.r_max = 8.0 * level.pool_size;
    return cfg;
}

}  // namespace sfr
