// Decoder training: exact reverse-mode parameter gradients of the weighted
// loss, including the chain through the six finite-difference field probes
// used by the Eikonal and Laplacian terms. Neighborhoods are recomputed per
// probe point but treated as fixed discrete selections — no gradient flows
// through neighbor choice. Updates use first-order adaptive moments (Adam)
// with the default moment constants.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sfr/core.hpp"
#include "sfr/decoder.hpp"
#include "sfr/field.hpp"
#include "sfr/losses.hpp"
#include "sfr/pyramid.hpp"

namespace sfr {

namespace detail {

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Upstream derivatives of one sample's weighted loss with respect to the
// seven probe values (scaled by lambda but not yet by the batch mean).
struct SampleUpstream {
    double d_center = 0.0;
    double d_logit = 0.0;
    double d_plus[3] = {0, 0, 0};
    double d_minus[3] = {0, 0, 0};
};

inline SampleUpstream sample_upstream(const SampleEvals& ev, const SampleTerms& t,
                                      const QuerySample& sample,
                                      const TrainConfig& cfg, double h) {
    SampleUpstream up;
    // L1 SDF term.
    up.d_center += cfg.lambda_sdf * sign_of(ev.sdf_center - sample.gt_sdf);
    // Eikonal: (|g| - 1)^2 with g the central differences.
    if (t.grad_norm > 0.0) {
        const double coef = cfg.lambda_eikonal * 2.0 * (t.grad_norm - 1.0) / t.grad_norm;
        for (int a = 0; a < 3; ++a) {
            const double dg = coef * t.grad[a] / (2.0 * h);
            up.d_plus[a] += dg;
            up.d_minus[a] -= dg;
        }
    }
    // Laplacian magnitude.
    if (cfg.lambda_laplacian != 0.0) {
        const double s = cfg.lambda_laplacian * sign_of(t.laplacian) / (h * h);
        for (int a = 0; a < 3; ++a) {
            up.d_plus[a] += s;
            up.d_minus[a] += s;
        }
        up.d_center += -6.0 * s;
    }
    // Mask cross entropy: d/dlogit = sigmoid(logit) - label.
    if (ev.logit_center) {
        const double sig = 1.0 / (1.0 + std::exp(-*ev.logit_center));
        up.d_logit = cfg.lambda_mask * (sig - (sample.mask_label ? 1.0 : 0.0));
    }
    return up;
}

}  // namespace detail

// One pyramid plus its ground-truth query samples.
struct TrainScene {
    const FeaturePyramid* pyramid = nullptr;
    std::vector<QuerySample> samples;
};

// Forward + backward over a batch. Loss values match compute_losses over a
// DecoderField with the same configuration exactly (shared probe and term
// code); gradients of the mean total loss are accumulated into `grads`,
// which must be zero-initialized with the decoder's shapes.
inline BatchLoss decoder_loss_and_grad(const FeaturePyramid& pyramid,
                                       const std::vector<QuerySample>& samples,
                                       const DecoderParams& params,
                                       const NeighborQueryConfig& qcfg,
                                       const TrainConfig& cfg, DecoderParams& grads) {
    if (samples.empty()) throw InvalidSpecError("loss over an empty sample batch");
    const double h = cfg.fd_step;

    struct Probe {
        detail::FieldEvalCache center;
        detail::FieldEvalCache plus[3];
        detail::FieldEvalCache minus[3];
    };
    Probe probe;
    std::vector<double> scratch;

    BatchLoss out;
    double sum_sdf = 0.0, sum_eik = 0.0, sum_lap = 0.0, sum_mask = 0.0;
    int mask_count = 0;

    struct Pending {
        detail::SampleUpstream up;
        Probe probes;
    };

    // Two passes would re-evaluate the field, so instead scale each sample's
    // contribution by 1/used after the batch; gradients are linear in the
    // upstream scalars, which lets us defer the mean. Mask uses its own count.
    std::vector<Pending> pending;
    pending.reserve(samples.size());

    for (const QuerySample& s : samples) {
        detail::SampleEvals ev;
        bool ok = detail::evaluate_with_cache(s.position, pyramid, params, qcfg,
                                              cfg.sdf_scale, probe.center);
        if (ok) {
            ev.sdf_center = probe.center.value.sdf;
            ev.logit_center = probe.center.value.mask_logit;
            for (int a = 0; a < 3 && ok; ++a) {
                Vec3 qp = s.position, qm = s.position;
                qp[a] += h;
                qm[a] -= h;
                ok = detail::evaluate_with_cache(qp, pyramid, params, qcfg,
                                                 cfg.sdf_scale, probe.plus[a]) &&
                     detail::evaluate_with_cache(qm, pyramid, params, qcfg,
                                                 cfg.sdf_scale, probe.minus[a]);
                if (ok) {
                    ev.sdf_plus[a] = probe.plus[a].value.sdf;
                    ev.sdf_minus[a] = probe.minus[a].value.sdf;
                }
            }
        }
        if (!ok) {
            ++out.skipped;
            continue;
        }
        ev.supported = true;
        ++out.used;

        const auto terms = detail::sample_terms(ev, s, h);
        sum_sdf += terms.l_sdf;
        sum_eik += terms.l_eikonal;
        sum_lap += terms.l_laplacian;
        if (terms.has_mask) {
            sum_mask += terms.l_mask;
            ++mask_count;
        }
        pending.push_back({detail::sample_upstream(ev, terms, s, cfg, h),
                           std::move(probe)});
        probe = Probe{};
    }

    if (out.used == 0)
        throw AllUnsupportedError("every sample in the batch lacks field support");

    const double inv_used = 1.0 / double(out.used);
    const double inv_mask = mask_count > 0 ? 1.0 / double(mask_count) : 0.0;
    for (const Pending& p : pending) {
        detail::backward_with_cache(p.probes.center, params, cfg.sdf_scale,
                                    p.up.d_center * inv_used, p.up.d_logit * inv_mask,
                                    grads, scratch);
        for (int a = 0; a < 3; ++a) {
            detail::backward_with_cache(p.probes.plus[a], params, cfg.sdf_scale,
                                        p.up.d_plus[a] * inv_used, 0.0, grads, scratch);
            detail::backward_with_cache(p.probes.minus[a], params, cfg.sdf_scale,
                                        p.up.d_minus[a] * inv_used, 0.0, grads, scratch);
        }
    }

    out.loss = combine_losses(cfg, sum_sdf * inv_used, sum_eik * inv_used,
                              mask_count > 0 ? sum_mask / double(mask_count) : 0.0,
                              sum_lap * inv_used);
    return out;
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void step(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
        if (m.empty()) {
            m.assign(theta.size(), 0.0);
            v.assign(theta.size(), 0.0);
        }
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, double(t));
        const double bc2 = 1.0 - std::pow(beta2, double(t));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + epsilon);
        }
    }
};

struct TrainResult {
    DecoderParams params;
    std::vector<double> loss_trace;  // total loss per step
    int skipped_samples = 0;
};

// Sequential steps, round-robin over scenes, batches drawn with replacement
// from each scene's sample pool. Aborts with the step index on a non-finite
// loss. With cfg.steps == 0 the initial parameters come back bit-identical.
inline TrainResult train_decoder(const std::vector<TrainScene>& scenes,
                                 const DecoderParams& init,
                                 const NeighborQueryConfig& qcfg,
                                 const TrainConfig& cfg) {
    if (scenes.empty()) throw InvalidSpecError("training needs at least one scene");
    for (const TrainScene& s : scenes)
        if (!s.pyramid || s.samples.empty())
            throw InvalidSpecError("training scene lacks a pyramid or samples");

    TrainResult result;
    result.params = init;
    result.loss_trace.reserve(std::size_t(std::max(cfg.steps, 0)));

    std::vector<double> theta = init.flatten();
    AdamState adam;
    std::mt19937_64 rng(cfg.seed);
    DecoderParams grads = init.shaped_zeros();

    for (int step = 0; step < cfg.steps; ++step) {
        const TrainScene& scene = scenes[std::size_t(step) % scenes.size()];
        std::uniform_int_distribution<std::size_t> pick(0, scene.samples.size() - 1);
        std::vector<QuerySample> batch;
        batch.reserve(std::size_t(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b)
            batch.push_back(scene.samples[pick(rng)]);

        grads.zero();
        const BatchLoss bl = decoder_loss_and_grad(*scene.pyramid, batch, result.params,
                                                   qcfg, cfg, grads);
        result.skipped_samples += bl.skipped;
        if (!std::isfinite(bl.loss.total))
            throw NonFiniteLossError("non-finite loss at step " + std::to_string(step));
        result.loss_trace.push_back(bl.loss.total);

        adam.step(theta, grads.flatten(), cfg.learning_rate);
        result.params.unflatten(theta);
    }
    return result;
}

}  // namespace sfr
