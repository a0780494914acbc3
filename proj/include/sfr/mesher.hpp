// Dual-grid isosurface extraction: one vertex per sign-changing cell, placed
// at the average of the cell's edge zero-crossings (linear interpolation of
// the corner SDFs), connected by quads across sign-changing grid edges and
// split into triangles wound so normals point toward positive SDF. Cells with
// an unsupported corner — and, when the mask gate is on, cells whose corners
// all classify far — emit nothing.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "sfr/core.hpp"
#include "sfr/field.hpp"

namespace sfr {

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::int32_t, 3>> triangles;

    bool empty() const { return triangles.empty(); }
};

struct ExtractionConfig {
    Aabb bounds;
    double cell = 0.02;  // meters
    bool mask_gate = false;
    double mask_threshold = 0.5;  // on sigmoid(logit); below counts as far
    int query_batch = 8192;       // corner evaluations per work chunk
    // Optional spatial gate on cell centers; cells failing it emit nothing.
    // Used by code-range scene partitioning to give each segment its region.
    std::function<bool(const Vec3&)> cell_filter;
};

namespace detail {

struct CornerGrid {
    std::int64_t nx = 0, ny = 0, nz = 0;  // cell counts
    Vec3 origin;
    double cell = 0.0;

    std::int64_t corner_index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return (i * (ny + 1) + j) * (nz + 1) + k;
    }
    std::int64_t cell_index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return (i * ny + j) * nz + k;
    }
    Vec3 corner_pos(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return origin + Vec3{double(i), double(j), double(k)} * cell;
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// Extracts the zero level set of `field` over a uniform grid. EmptyMesh is a
// valid result (field of constant sign, fully gated, or no support).
template <typename Field>
Mesh extract_mesh(const Field& field, const ExtractionConfig& cfg) {
    if (cfg.cell <= 0.0) throw InvalidSpecError("extraction cell size must be positive");
    if (cfg.bounds.degenerate()) throw InvalidSpecError("extraction bounds are degenerate");

    detail::CornerGrid grid;
    grid.origin = cfg.bounds.lo;
    grid.cell = cfg.cell;
    const Vec3 ext = cfg.bounds.extent();
    grid.nx = std::int64_t(std::ceil(ext.x / cfg.cell));
    grid.ny = std::int64_t(std::ceil(ext.y / cfg.cell));
    grid.nz = std::int64_t(std::ceil(ext.z / cfg.cell));
    const std::int64_t corners = (grid.nx + 1) * (grid.ny + 1) * (grid.nz + 1);
    if (corners > (std::int64_t(1) << 31))
        throw InvalidSpecError("extraction grid exceeds 2^31 corners; enlarge the cell");

    // Corner field values. status: bit0 supported, bit1 far (mask gate).
    std::vector<double> sdf(std::size_t(corners), 0.0);
    std::vector<std::uint8_t> status(std::size_t(corners), 0);
    const double logit_far = cfg.mask_threshold;

    const std::int64_t per_slab = (grid.ny + 1) * (grid.nz + 1);
    const std::int64_t slabs_per_chunk =
        std::max<std::int64_t>(1, cfg.query_batch / std::max<std::int64_t>(per_slab, 1));
    const std::int64_t chunks = (grid.nx + 1 + slabs_per_chunk - 1) / slabs_per_chunk;
    parallel_for(std::size_t(chunks), [&](std::size_t c) {
        const std::int64_t i_begin = std::int64_t(c) * slabs_per_chunk;
        const std::int64_t i_end = std::min(grid.nx + 1, i_begin + slabs_per_chunk);
        for (std::int64_t i = i_begin; i < i_end; ++i)
            for (std::int64_t j = 0; j <= grid.ny; ++j)
                for (std::int64_t k = 0; k <= grid.nz; ++k) {
                    const auto value = field(grid.corner_pos(i, j, k));
                    const std::int64_t idx = grid.corner_index(i, j, k);
                    if (!value) continue;
                    std::uint8_t st = 1;
                    if (value->mask_logit &&
                        detail::sigmoid(*value->mask_logit) < logit_far)
                        st |= 2;
                    sdf[std::size_t(idx)] = value->sdf;
                    status[std::size_t(idx)] = st;
                }
    });

    // Corner offsets in (x, y, z) and the 12 cell edges as corner index pairs.
    static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
                                          {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
    static constexpr int kEdge[12][2] = {{0, 1}, {2, 3}, {4, 5}, {6, 7},
                                         {0, 2}, {1, 3}, {4, 6}, {5, 7},
                                         {0, 4}, {1, 5}, {2, 6}, {3, 7}};

    Mesh mesh;
    std::vector<std::int32_t> cell_vertex(std::size_t(grid.nx * grid.ny * grid.nz), -1);

    for (std::int64_t i = 0; i < grid.nx; ++i)
        for (std::int64_t j = 0; j < grid.ny; ++j)
            for (std::int64_t k = 0; k < grid.nz; ++k) {
                double s[8];
                bool ok = true;
                bool all_far = true;
                bool any_neg = false, any_pos = false;
                for (int c = 0; c < 8; ++c) {
                    const std::int64_t idx = grid.corner_index(
                        i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
                    const std::uint8_t st = status[std::size_t(idx)];
                    if (!(st & 1)) {
                        ok = false;
                        break;
                    }
                    if (!(st & 2)) all_far = false;
                    s[c] = sdf[std::size_t(idx)];
                    (s[c] < 0.0 ? any_neg : any_pos) = true;
                }
                if (!ok || !any_neg || !any_pos) continue;
                if (cfg.mask_gate && all_far) continue;
                if (cfg.cell_filter &&
                    !cfg.cell_filter(grid.corner_pos(i, j, k) +
                                     Vec3{0.5, 0.5, 0.5} * grid.cell))
                    continue;

                Vec3 acc{};
                int crossings = 0;
                for (const auto& e : kEdge) {
                    const double sa = s[e[0]], sb = s[e[1]];
                    if ((sa < 0.0) == (sb < 0.0)) continue;
                    const double t = sa / (sa - sb);
                    const Vec3 a = grid.corner_pos(i + kCorner[e[0]][0], j + kCorner[e[0]][1],
                                                   k + kCorner[e[0]][2]);
                    const Vec3 b = grid.corner_pos(i + kCorner[e[1]][0], j + kCorner[e[1]][1],
                                                   k + kCorner[e[1]][2]);
                    acc += a + (b - a) * t;
                    ++crossings;
                }
                cell_vertex[std::size_t(grid.cell_index(i, j, k))] =
                    std::int32_t(mesh.vertices.size());
                mesh.vertices.push_back(acc / double(crossings));
            }

    // Quads across sign-changing interior edges. For an edge along axis d the
    // four cells sharing it sit at offsets -a*e_u - b*e_v from the edge's base
    // corner; counterclockwise around +d the order is (0,0),(1,0),(1,1),(0,1).
    auto cell_at = [&](std::int64_t i, std::int64_t j, std::int64_t k) -> std::int32_t {
        if (i < 0 || j < 0 || k < 0 || i >= grid.nx || j >= grid.ny || k >= grid.nz)
            return -1;
        return cell_vertex[std::size_t(grid.cell_index(i, j, k))];
    };

    for (int d = 0; d < 3; ++d) {
        const int u = (d + 1) % 3;
        const int v = (d + 2) % 3;
        const std::int64_t n[3] = {grid.nx, grid.ny, grid.nz};
        // Edge base corners: interior in u and v, cell-range in d.
        std::int64_t c[3];
        for (c[d] = 0; c[d] < n[d]; ++c[d])
            for (c[u] = 1; c[u] < n[u]; ++c[u])
                for (c[v] = 1; c[v] < n[v]; ++c[v]) {
                    const std::int64_t base = grid.corner_index(c[0], c[1], c[2]);
                    std::int64_t tip_c[3] = {c[0], c[1], c[2]};
                    ++tip_c[d];
                    const std::int64_t tip = grid.corner_index(tip_c[0], tip_c[1], tip_c[2]);
                    if (!(status[std::size_t(base)] & 1) || !(status[std::size_t(tip)] & 1))
                        continue;
                    const double sa = sdf[std::size_t(base)];
                    const double sb = sdf[std::size_t(tip)];
                    if ((sa < 0.0) == (sb < 0.0)) continue;

                    std::int32_t quad[4];
                    bool have_all = true;
                    static constexpr int kRing[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
                    for (int r = 0; r < 4 && have_all; ++r) {
                        std::int64_t cc[3] = {c[0], c[1], c[2]};
                        cc[u] -= kRing[r][0];
                        cc[v] -= kRing[r][1];
                        quad[r] = cell_at(cc[0], cc[1], cc[2]);
                        have_all = quad[r] >= 0;
                    }
                    if (!have_all) continue;

                    // sa < 0 means the field grows along +d: wind CCW around +d.
                    if (sa < 0.0) {
                        mesh.triangles.push_back({quad[0], quad[1], quad[2]});
                        mesh.triangles.push_back({quad[0], quad[2], quad[3]});
                    } else {
                        mesh.triangles.push_back({quad[0], quad[3], quad[2]});
                        mesh.triangles.push_back({quad[0], quad[2], quad[1]});
                    }
                }
    }
    return mesh;
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

// Area-weighted triangle selection followed by uniform barycentric sampling;
// deterministic for a fixed seed.
inline std::vector<Vec3> sample_surface(const Mesh& mesh, std::size_t n,
                                        std::uint64_t seed) {
    std::vector<Vec3> out;
    if (n == 0) return out;
    if (mesh.empty()) throw EmptyMeshError("cannot sample an empty mesh");

    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        total += triangle_area(mesh.vertices[std::size_t(tri[0])],
                               mesh.vertices[std::size_t(tri[1])],
                               mesh.vertices[std::size_t(tri[2])]);
        cumulative[t] = total;
    }
    if (!(total > 0.0)) throw EmptyMeshError("mesh has zero surface area");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = unit(rng) * total;
        const std::size_t t = std::size_t(
            std::lower_bound(cumulative.begin(), cumulative.end(), u) -
            cumulative.begin());
        const auto& tri = mesh.triangles[std::min(t, mesh.triangles.size() - 1)];
        const double r1 = std::sqrt(unit(rng));
        const double r2 = unit(rng);
        const Vec3& a = mesh.vertices[std::size_t(tri[0])];
        const Vec3& b = mesh.vertices[std::size_t(tri[1])];
        const Vec3& c = mesh.vertices[std::size_t(tri[2])];
        out.push_back(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
    }
    return out;
}

}  // namespace sfr
