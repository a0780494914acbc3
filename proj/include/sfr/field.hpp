// The distance field: per-level inverse-distance aggregation of encoded
// neighbor features, summed across levels and mapped to an SDF value and a
// near/far mask logit. Also provides the training-free IMLS decoder (weighted
// point-plane distances over oriented points) and finite-difference field
// gradients.
//
// "No support" — a query whose neighborhoods are empty at every level — is a
// value (std::nullopt), not an error; the mesher leaves such regions
// unreconstructed.
#pragma once

#include <optional>
#include <vector>

#include "sfr/core.hpp"
#include "sfr/decoder.hpp"
#include "sfr/pyramid.hpp"
#include "sfr/spatial.hpp"

namespace sfr {

// Division guard of the aggregation denominator and the inverse-distance
// weight clamp. A query coincident with a neighbor gets weight 1/eps, which
// dominates the average as intended.
inline constexpr double kAggregateEpsilon = 1e-8;
inline constexpr double kWeightEpsilon = 1e-8;

inline double inverse_distance_weight(double distance) {
    return 1.0 / std::max(distance, kWeightEpsilon);
}

struct FieldSample {
    double sdf = 0.0;
    std::optional<double> mask_logit;
};

namespace detail {

// Forward caches for one field evaluation, reused across queries to avoid
// churn. Only the training path reads them back.
struct LevelEvalCache {
    NeighborSet neighbors;
    std::vector<double> weights;
    double weight_sum = 0.0;
    std::vector<EncoderMlp::Cache> encoder;
    std::vector<double> aggregate;
    bool empty = true;
};

struct FieldEvalCache {
    std::vector<LevelEvalCache> levels;
    std::vector<double> fused;
    HeadMlp::Cache sdf_head;
    HeadMlp::Cache mask_head;
    double sdf_tanh = 0.0;
    FieldSample value;
    bool supported = false;
};

inline void aggregate_into(const Vec3& q, const PointCloud& cloud,
                           const NeighborSet& neighbors, const EncoderMlp& encoder,
                           LevelEvalCache& cache) {
    const int h = encoder.l1.out;
    const int in_dim = encoder.l1.in;
    const std::size_t n = neighbors.entries.size();
    cache.weights.resize(n);
    cache.encoder.resize(n);
    cache.aggregate.assign(std::size_t(h), 0.0);
    cache.weight_sum = 0.0;
    cache.empty = n == 0;
    if (cache.empty) return;

    std::vector<double> input(std::size_t(in_dim), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const NeighborEntry& nb = neighbors.entries[j];
        const Vec3 rel = cloud.positions[std::size_t(nb.index)] - q;
        input[0] = rel.x;
        input[1] = rel.y;
        input[2] = rel.z;
        if (cloud.has_features()) {
            const auto& f = cloud.features[std::size_t(nb.index)];
            for (std::size_t d = 0; d < f.size() && 3 + d < input.size(); ++d)
                input[3 + d] = f[d];
        }
        encoder.forward(input.data(), cache.encoder[j]);
        const double w = inverse_distance_weight(nb.distance);
        cache.weights[j] = w;
        cache.weight_sum += w;
        for (int i = 0; i < h; ++i)
            cache.aggregate[std::size_t(i)] += w * cache.encoder[j].y[std::size_t(i)];
    }
    const double denom = kAggregateEpsilon + cache.weight_sum;
    for (int i = 0; i < h; ++i) cache.aggregate[std::size_t(i)] /= denom;
}

}  // namespace detail

struct AggregateResult {
    std::vector<double> feature;
    bool empty = true;  // zero vector with the emptiness flag, not an error
};

// Eq.-style aggregation: sum_j w_j E(p_j - q, f_j) / (eps + sum_j w_j) with
// w the clamped inverse distance.
inline AggregateResult aggregate_level(const Vec3& q, const PyramidLevel& level,
                                       const NeighborSet& neighbors,
                                       const EncoderMlp& encoder) {
    detail::LevelEvalCache cache;
    detail::aggregate_into(q, level.cloud, neighbors, encoder, cache);
    return {std::move(cache.aggregate), cache.empty};
}

namespace detail {

// Full forward evaluation with caches. Returns false when every level is
// empty (no support).
inline bool evaluate_with_cache(const Vec3& q, const FeaturePyramid& pyramid,
                                const DecoderParams& params,
                                const NeighborQueryConfig& qcfg, double sdf_scale,
                                FieldEvalCache& cache) {
    const std::size_t levels = pyramid.level_count();
    cache.levels.resize(levels);
    cache.fused.assign(std::size_t(params.hidden), 0.0);
    bool any = false;
    for (std::size_t s = 0; s < levels; ++s) {
        const PyramidLevel& level = pyramid.levels[s];
        LevelEvalCache& lc = cache.levels[s];
        lc.neighbors = approx_neighbors(level.index, q, level_query_config(qcfg, level));
        aggregate_into(q, level.cloud, lc.neighbors, params.encoders[s], lc);
        if (!lc.empty) {
            any = true;
            for (int i = 0; i < params.hidden; ++i)
                cache.fused[std::size_t(i)] += lc.aggregate[std::size_t(i)];
        }
    }
    cache.supported = any;
    if (!any) return false;

    const double raw = params.sdf_head.forward(cache.fused.data(), cache.sdf_head);
    cache.sdf_tanh = std::tanh(raw);
    cache.value.sdf = cache.sdf_tanh * sdf_scale;
    cache.value.mask_logit = params.mask_head.forward(cache.fused.data(), cache.mask_head);
    return true;
}

// Reverse pass matching evaluate_with_cache: upstream scalars are d(loss)/d(sdf)
// and d(loss)/d(logit). Neighbor selection and inverse-distance weights are
// treated as fixed (no gradient through neighbor choice or through q).
inline void backward_with_cache(const FieldEvalCache& cache,
                                const DecoderParams& params, double sdf_scale,
                                double d_sdf, double d_logit, DecoderParams& grads,
                                std::vector<double>& scratch) {
    if (!cache.supported) return;
    const int h = params.hidden;
    std::vector<double> d_fused(std::size_t(h), 0.0);
    if (d_sdf != 0.0) {
        const double d_raw = d_sdf * sdf_scale * (1.0 - cache.sdf_tanh * cache.sdf_tanh);
        params.sdf_head.backward(cache.sdf_head, d_raw, grads.sdf_head, d_fused.data());
    }
    if (d_logit != 0.0)
        params.mask_head.backward(cache.mask_head, d_logit, grads.mask_head, d_fused.data());

    std::vector<double> d_enc(std::size_t(h), 0.0);
    for (std::size_t s = 0; s < cache.levels.size(); ++s) {
        const LevelEvalCache& lc = cache.levels[s];
        if (lc.empty) continue;
        const double denom = kAggregateEpsilon + lc.weight_sum;
        for (std::size_t j = 0; j < lc.encoder.size(); ++j) {
            const double scale = lc.weights[j] / denom;
            for (int i = 0; i < h; ++i) d_enc[std::size_t(i)] = scale * d_fused[std::size_t(i)];
            params.encoders[s].backward(lc.encoder[j], d_enc.data(), grads.encoders[s],
                                        scratch);
        }
    }
}

}  // namespace detail

// Learned field evaluator over a pyramid. Callable: q -> optional<FieldSample>.
struct DecoderField {
    const FeaturePyramid* pyramid = nullptr;
    const DecoderParams* params = nullptr;
    NeighborQueryConfig query;
    double sdf_scale = 0.5;

    std::optional<FieldSample> operator()(const Vec3& q) const {
        detail::FieldEvalCache cache;
        if (!detail::evaluate_with_cache(q, *pyramid, *params, query, sdf_scale, cache))
            return std::nullopt;
        return cache.value;
    }
};

// Sum-fused multi-level feature; exposed for inspection and tests.
inline std::optional<std::vector<double>> fused_feature(const Vec3& q,
                                                        const FeaturePyramid& pyramid,
                                                        const DecoderParams& params,
                                                        const NeighborQueryConfig& qcfg) {
    detail::FieldEvalCache cache;
    if (!detail::evaluate_with_cache(q, pyramid, params, qcfg, 1.0, cache))
        return std::nullopt;
    return cache.fused;
}

inline std::optional<FieldSample> evaluate_field(const Vec3& q,
                                                 const FeaturePyramid& pyramid,
                                                 const DecoderParams& params,
                                                 const NeighborQueryConfig& qcfg,
                                                 double sdf_scale = 0.5) {
    return DecoderField{&pyramid, &params, qcfg, sdf_scale}(q);
}

// Implicit moving least squares: weighted mean of point-plane distances
// n_p . (q - p) over the neighborhood, with the same inverse-distance weights
// as the learned aggregation. Needs oriented normals; empty neighborhoods
// yield no support.
inline std::optional<double> imls_distance(const Vec3& q, const PointCloud& cloud,
                                           const NeighborSet& neighbors) {
    if (neighbors.entries.empty()) return std::nullopt;
    if (!cloud.has_normals())
        throw InvalidSpecError("imls_distance needs per-point normals");
    double acc = 0.0;
    double wsum = 0.0;
    for (const NeighborEntry& nb : neighbors.entries) {
        const std::size_t i = std::size_t(nb.index);
        const double w = inverse_distance_weight(nb.distance);
        acc += w * cloud.normals[i].dot(q - cloud.positions[i]);
        wsum += w;
    }
    return acc / (kAggregateEpsilon + wsum);
}

// Training-free field evaluator over a single serialized index.
struct ImlsField {
    const PointCloud* cloud = nullptr;
    const SerializedIndex* index = nullptr;
    NeighborQueryConfig query;

    std::optional<FieldSample> operator()(const Vec3& q) const {
        const NeighborSet nbrs = approx_neighbors(*index, q, query);
        const auto d = imls_distance(q, *cloud, nbrs);
        if (!d) return std::nullopt;
        return FieldSample{*d, std::nullopt};
    }
};

// Wraps a plain sdf(q) lambda as a field evaluator (no mask logit).
template <typename F>
struct AnalyticField {
    F sdf;
    std::optional<FieldSample> operator()(const Vec3& q) const {
        return FieldSample{sdf(q), std::nullopt};
    }
};
template <typename F>
AnalyticField<F> make_analytic_field(F&& sdf) {
    return AnalyticField<F>{std::forward<F>(sdf)};
}

// Central finite differences per axis, (f(q+h e_i) - f(q-h e_i)) / 2h.
// Propagates no-support from any of the six probes.
template <typename Field>
std::optional<Vec3> field_gradient(const Field& field, const Vec3& q, double h) {
    if (!(h > 0.0)) throw InvalidSpecError("finite-difference step must be positive");
    Vec3 g;
    for (int axis = 0; axis < 3; ++axis) {
        Vec3 qp = q, qm = q;
        qp[axis] += h;
        qm[axis] -= h;
        const auto fp = field(qp);
        const auto fm = field(qm);
        if (!fp || !fm) return std::nullopt;
        g[axis] = (fp->sdf - fm->sdf) / (2.0 * h);
    }
    return g;
}

}  // namespace sfr
