// Synthetic scenes with closed-form signed distance oracles: spheres, boxes,
// and tori combined by union (min of member SDFs — exact outside, a lower
// bound inside overlaps, which the oracle flags). Scenes provide area-weighted
// surface sampling, the non-uniform arithmetic-block sampling protocol, and
// ground-truth query samples for training.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "sfr/core.hpp"
#include "sfr/losses.hpp"
#include "sfr/pyramid.hpp"

namespace sfr {

struct SpherePrimitive {
    Vec3 center;
    double radius = 1.0;
};

struct BoxPrimitive {
    Vec3 center;
    Vec3 half_extents{0.5, 0.5, 0.5};
};

// Ring around the z axis through `center`: tube radius `minor` at distance
// `major` from the axis.
struct TorusPrimitive {
    Vec3 center;
    double major = 1.0;
    double minor = 0.25;
};

using ScenePrimitive = std::variant<SpherePrimitive, BoxPrimitive, TorusPrimitive>;

inline double signed_distance(const SpherePrimitive& s, const Vec3& q) {
    return (q - s.center).norm() - s.radius;
}

inline double signed_distance(const BoxPrimitive& b, const Vec3& q) {
    const Vec3 p = q - b.center;
    const Vec3 d{std::abs(p.x) - b.half_extents.x, std::abs(p.y) - b.half_extents.y,
                 std::abs(p.z) - b.half_extents.z};
    const Vec3 outside{std::max(d.x, 0.0), std::max(d.y, 0.0), std::max(d.z, 0.0)};
    const double inside = std::min(std::max(d.x, std::max(d.y, d.z)), 0.0);
    return outside.norm() + inside;
}

inline double signed_distance(const TorusPrimitive& t, const Vec3& q) {
    const Vec3 p = q - t.center;
    const double ring = std::sqrt(p.x * p.x + p.y * p.y) - t.major;
    return std::sqrt(ring * ring + p.z * p.z) - t.minor;
}

inline double signed_distance(const ScenePrimitive& prim, const Vec3& q) {
    return std::visit([&q](const auto& p) { return signed_distance(p, q); }, prim);
}

inline double surface_area(const SpherePrimitive& s) {
    return 4.0 * M_PI * s.radius * s.radius;
}
inline double surface_area(const BoxPrimitive& b) {
    const Vec3& h = b.half_extents;
    return 8.0 * (h.x * h.y + h.y * h.z + h.z * h.x);
}
inline double surface_area(const TorusPrimitive& t) {
    return 4.0 * M_PI * M_PI * t.major * t.minor;
}
inline double surface_area(const ScenePrimitive& prim) {
    return std::visit([](const auto& p) { return surface_area(p); }, prim);
}

inline Aabb bounds_of(const SpherePrimitive& s) {
    const Vec3 r{s.radius, s.radius, s.radius};
    return {s.center - r, s.center + r};
}
inline Aabb bounds_of(const BoxPrimitive& b) {
    return {b.center - b.half_extents, b.center + b.half_extents};
}
inline Aabb bounds_of(const TorusPrimitive& t) {
    const Vec3 r{t.major + t.minor, t.major + t.minor, t.minor};
    return {t.center - r, t.center + r};
}
inline Aabb bounds_of(const ScenePrimitive& prim) {
    return std::visit([](const auto& p) { return bounds_of(p); }, prim);
}

enum class SamplingMode { Uniform, NonUniform };

struct SceneSpec {
    std::vector<ScenePrimitive> primitives;
    int count = 10000;
    double sigma = 0.0;  // noise along the surface normal, meters
    SamplingMode sampling = SamplingMode::Uniform;
    std::uint64_t seed = 1;
    int block_difference = 200;  // arithmetic step of the octant counts
    double pad = 0.3;            // bounds padding for volume queries, meters
};

struct OracleProbe {
    double sdf = 0.0;
    // True when the probe sits inside at least two primitives, where the
    // union-by-min value is only a lower bound on the true distance.
    bool overlapped = false;
};

// Exact union SDF oracle; owns its primitive list so it outlives the spec.
class SceneSdf {
public:
    SceneSdf() = default;
    explicit SceneSdf(std::vector<ScenePrimitive> prims, double pad = 0.3)
        : primitives_(std::move(prims)), pad_(pad) {}

    double operator()(const Vec3& q) const { return probe(q).sdf; }

    OracleProbe probe(const Vec3& q) const {
        OracleProbe out;
        out.sdf = std::numeric_limits<double>::infinity();
        int inside = 0;
        for (const auto& prim : primitives_) {
            const double d = signed_distance(prim, q);
            out.sdf = std::min(out.sdf, d);
            if (d < 0.0) ++inside;
        }
        out.overlapped = inside > 1;
        return out;
    }

    Aabb tight_bounds() const {
        if (primitives_.empty()) throw InvalidSpecError("scene has no primitives");
        Aabb b = bounds_of(primitives_[0]);
        for (std::size_t i = 1; i < primitives_.size(); ++i) b.expand(bounds_of(primitives_[i]));
        return b;
    }

    Aabb bounds() const { return tight_bounds().padded(pad_); }

    const std::vector<ScenePrimitive>& primitives() const { return primitives_; }

private:
    std::vector<ScenePrimitive> primitives_;
    double pad_ = 0.3;
};

namespace detail {

struct SurfaceSample {
    Vec3 point;
    Vec3 normal;
};

inline Vec3 uniform_direction(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 v;
    do {
        v = {gauss(rng), gauss(rng), gauss(rng)};
    } while (v.norm2() < 1e-24);
    return v.normalized();
}

inline SurfaceSample sample_surface_point(const SpherePrimitive& s,
                                          std::mt19937_64& rng) {
    const Vec3 dir = uniform_direction(rng);
    return {s.center + dir * s.radius, dir};
}

inline SurfaceSample sample_surface_point(const BoxPrimitive& b, std::mt19937_64& rng) {
    const Vec3& h = b.half_extents;
    // Face pair areas for +-x, +-y, +-z.
    const double areas[3] = {h.y * h.z, h.z * h.x, h.x * h.y};
    std::discrete_distribution<int> face_axis({areas[0], areas[0], areas[1], areas[1],
                                               areas[2], areas[2]});
    const int f = face_axis(rng);
    const int axis = f / 2;
    const double side = (f % 2 == 0) ? 1.0 : -1.0;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Vec3 p;
    p[axis] = side * h[axis];
    p[(axis + 1) % 3] = unit(rng) * h[(axis + 1) % 3];
    p[(axis + 2) % 3] = unit(rng) * h[(axis + 2) % 3];
    Vec3 n{};
    n[axis] = side;
    return {b.center + p, n};
}

inline SurfaceSample sample_surface_point(const TorusPrimitive& t,
                                          std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = angle(rng);
    // Tube angle v has density proportional to (R + r cos v); rejection keeps
    // the sampling area-uniform.
    double v;
    do {
        v = angle(rng);
    } while (unit(rng) * (t.major + t.minor) > t.major + t.minor * std::cos(v));
    const double ring = t.major + t.minor * std::cos(v);
    const Vec3 p{ring * std::cos(u), ring * std::sin(u), t.minor * std::sin(v)};
    const Vec3 n{std::cos(v) * std::cos(u), std::cos(v) * std::sin(u), std::sin(v)};
    return {t.center + p, n};
}

inline SurfaceSample sample_surface_point(const ScenePrimitive& prim,
                                          std::mt19937_64& rng) {
    return std::visit([&rng](const auto& p) { return sample_surface_point(p, rng); },
                      prim);
}

inline int octant_of(const Vec3& p, const Vec3& center) {
    return (p.x > center.x ? 1 : 0) | (p.y > center.y ? 2 : 0) |
           (p.z > center.z ? 4 : 0);
}

}  // namespace detail

// Counts per octant block: an arithmetic sequence with the configured common
// difference, the last block padded so the total is exact.
inline std::vector<int> nonuniform_block_counts(int total, int difference) {
    const int base = (total - difference * 28) / 8;
    if (base < 1)
        throw InvalidSpecError("non-uniform sampling needs count >= 28*difference + 8");
    std::vector<int> counts(8);
    int sum = 0;
    for (int j = 0; j < 8; ++j) {
        counts[std::size_t(j)] = base + difference * j;
        sum += counts[std::size_t(j)];
    }
    counts[7] += total - sum;
    return counts;
}

struct GeneratedScene {
    PointCloud cloud;
    SceneSdf oracle;
};

// Draws `spec.count` surface samples, area-weighted across primitives, with
// oriented normals and optional Gaussian displacement along the normal.
// Samples buried inside another primitive of the union are rejected. In
// non-uniform mode the per-octant quotas follow the arithmetic-block counts
// (octants of the tight scene bounds, assignment before noise).
inline GeneratedScene generate_scene(const SceneSpec& spec) {
    if (spec.primitives.empty()) throw InvalidSpecError("scene has no primitives");
    if (spec.count < 0) throw InvalidSpecError("negative sample count");
    for (const auto& prim : spec.primitives) {
        const bool ok = std::visit(
            [](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, SpherePrimitive>) return p.radius > 0.0;
                if constexpr (std::is_same_v<T, BoxPrimitive>)
                    return p.half_extents.x > 0.0 && p.half_extents.y > 0.0 &&
                           p.half_extents.z > 0.0;
                if constexpr (std::is_same_v<T, TorusPrimitive>)
                    return p.major > 0.0 && p.minor > 0.0 && p.minor < p.major;
                return false;
            },
            prim);
        if (!ok) throw InvalidSpecError("primitive has non-positive extents");
    }

    GeneratedScene out;
    out.oracle = SceneSdf(spec.primitives, spec.pad);

    std::mt19937_64 rng(spec.seed);
    std::vector<double> areas;
    areas.reserve(spec.primitives.size());
    for (const auto& prim : spec.primitives) areas.push_back(surface_area(prim));
    std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<int> quota;
    Vec3 block_center;
    if (spec.sampling == SamplingMode::NonUniform) {
        quota = nonuniform_block_counts(spec.count, spec.block_difference);
        block_center = out.oracle.tight_bounds().center();
    }

    out.cloud.positions.reserve(std::size_t(spec.count));
    out.cloud.normals.reserve(std::size_t(spec.count));

    const std::int64_t max_attempts =
        std::int64_t(4096) + std::int64_t(spec.count) * 4096;
    std::int64_t attempts = 0;
    while (out.cloud.positions.size() < std::size_t(spec.count)) {
        if (++attempts > max_attempts)
            throw InvalidSpecError(
                "surface sampling stalled (octant quota or union unreachable)");
        const std::size_t which = pick(rng);
        const auto s = detail::sample_surface_point(spec.primitives[which], rng);
        // Reject samples hidden inside the union.
        bool buried = false;
        for (std::size_t i = 0; i < spec.primitives.size(); ++i)
            if (i != which && signed_distance(spec.primitives[i], s.point) < -1e-9) {
                buried = true;
                break;
            }
        if (buried) continue;
        if (spec.sampling == SamplingMode::NonUniform) {
            const int block = detail::octant_of(s.point, block_center);
            if (quota[std::size_t(block)] <= 0) continue;
            --quota[std::size_t(block)];
        }
        Vec3 p = s.point;
        if (spec.sigma > 0.0) p += s.normal * (noise(rng) * spec.sigma);
        out.cloud.positions.push_back(p);
        out.cloud.normals.push_back(s.normal);
    }
    return out;
}

struct QueryCounts {
    int near_surface = 4000;
    int uniform = 2000;
};

// Ground-truth query mixture: surface samples perturbed by an isotropic
// Gaussian (sigma = mask_band) plus uniform box samples over the padded scene
// bounds. Labels threshold |gt_sdf| at the mask band.
inline std::vector<QuerySample> sample_training_queries(const SceneSdf& oracle,
                                                        const QueryCounts& counts,
                                                        const TrainConfig& cfg,
                                                        std::uint64_t seed) {
    if (counts.near_surface < 0 || counts.uniform < 0)
        throw InvalidSpecError("negative query counts");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<QuerySample> samples;
    samples.reserve(std::size_t(counts.near_surface + counts.uniform));

    SceneSpec surface_spec;
    surface_spec.primitives = oracle.primitives();
    surface_spec.count = counts.near_surface;
    surface_spec.seed = seed ^ 0x9e3779b97f4a7c15ull;
    const GeneratedScene base = generate_scene(surface_spec);
    for (const Vec3& p : base.cloud.positions) {
        const Vec3 q = p + Vec3{gauss(rng), gauss(rng), gauss(rng)} * cfg.mask_band;
        const double d = oracle(q);
        samples.push_back({q, d, std::abs(d) < cfg.mask_band});
    }

    const Aabb box = oracle.bounds();
    std::uniform_real_distribution<double> ux(box.lo.x, box.hi.x);
    std::uniform_real_distribution<double> uy(box.lo.y, box.hi.y);
    std::uniform_real_distribution<double> uz(box.lo.z, box.hi.z);
    for (int i = 0; i < counts.uniform; ++i) {
        const Vec3 q{ux(rng), uy(rng), uz(rng)};
        const double d = oracle(q);
        samples.push_back({q, d, std::abs(d) < cfg.mask_band});
    }
    return samples;
}

}  // namespace sfr
