// Training losses over query samples: L1 SDF supervision, the Eikonal
// unit-gradient penalty, binary cross entropy for the near/far mask, and the
// optional Laplacian smoothness term. Spatial derivatives use central finite
// differences (the field is piecewise-defined in q through its neighbor
// sets), so each sample costs one center evaluation plus six offsets.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sfr/core.hpp"
#include "sfr/field.hpp"

namespace sfr {

struct QuerySample {
    Vec3 position;
    double gt_sdf = 0.0;   // meters
    bool mask_label = false;  // true = near surface (|gt_sdf| < mask_band)
};

struct LossBreakdown {
    double l_sdf = 0.0;
    double l_eikonal = 0.0;
    double l_mask = 0.0;
    double l_laplacian = 0.0;
    double total = 0.0;
};

struct TrainConfig {
    double lambda_sdf = 300.0;
    double lambda_eikonal = 10.0;
    double lambda_mask = 150.0;
    double lambda_laplacian = 0.0;  // 1e-4 / 1e-3 trade accuracy for smoothness
    double mask_band = 0.015;       // meters; 0.1 for outdoor scale
    double learning_rate = 1e-3;
    int steps = 500;
    int batch_size = 128;
    double fd_step = 1e-3;  // h for spatial finite differences, meters
    double sdf_scale = 0.5;
    std::uint64_t seed = 1;
};

inline LossBreakdown combine_losses(const TrainConfig& cfg, double l_sdf,
                                    double l_eikonal, double l_mask,
                                    double l_laplacian) {
    LossBreakdown out;
    out.l_sdf = l_sdf;
    out.l_eikonal = l_eikonal;
    out.l_mask = l_mask;
    out.l_laplacian = l_laplacian;
    out.total = cfg.lambda_sdf * l_sdf + cfg.lambda_eikonal * l_eikonal +
                cfg.lambda_mask * l_mask + cfg.lambda_laplacian * l_laplacian;
    return out;
}

struct BatchLoss {
    LossBreakdown loss;
    int used = 0;     // samples with support at all seven probe points
    int skipped = 0;  // no-support samples
};

namespace detail {

// The seven field probes backing one sample's loss terms.
struct SampleEvals {
    double sdf_center = 0.0;
    std::optional<double> logit_center;
    double sdf_plus[3] = {0, 0, 0};
    double sdf_minus[3] = {0, 0, 0};
    bool supported = false;
};

template <typename Field>
SampleEvals probe_sample(const Field& field, const Vec3& q, double h) {
    SampleEvals ev;
    const auto center = field(q);
    if (!center) return ev;
    ev.sdf_center = center->sdf;
    ev.logit_center = center->mask_logit;
    for (int axis = 0; axis < 3; ++axis) {
        Vec3 qp = q, qm = q;
        qp[axis] += h;
        qm[axis] -= h;
        const auto fp = field(qp);
        const auto fm = field(qm);
        if (!fp || !fm) return ev;
        ev.sdf_plus[axis] = fp->sdf;
        ev.sdf_minus[axis] = fm->sdf;
    }
    ev.supported = true;
    return ev;
}

struct SampleTerms {
    double l_sdf = 0.0;
    double l_eikonal = 0.0;
    double l_mask = 0.0;
    bool has_mask = false;
    double l_laplacian = 0.0;
    // Intermediates reused by the backward pass.
    double grad[3] = {0, 0, 0};
    double grad_norm = 0.0;
    double laplacian = 0.0;
};

inline double binary_cross_entropy(double logit, bool label) {
    // softplus(logit) - label*logit, stable for large |logit|.
    const double sp = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
    return sp - (label ? logit : 0.0);
}

inline SampleTerms sample_terms(const SampleEvals& ev, const QuerySample& sample,
                                double h) {
    SampleTerms t;
    t.l_sdf = std::abs(sample.gt_sdf - ev.sdf_center);

    double norm2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        t.grad[a] = (ev.sdf_plus[a] - ev.sdf_minus[a]) / (2.0 * h);
        norm2 += t.grad[a] * t.grad[a];
    }
    t.grad_norm = std::sqrt(norm2);
    const double dev = t.grad_norm - 1.0;
    t.l_eikonal = dev * dev;

    t.laplacian = 0.0;
    for (int a = 0; a < 3; ++a)
        t.laplacian += (ev.sdf_plus[a] + ev.sdf_minus[a] - 2.0 * ev.sdf_center) / (h * h);
    t.l_laplacian = std::abs(t.laplacian);

    if (ev.logit_center) {
        t.has_mask = true;
        t.l_mask = binary_cross_entropy(*ev.logit_center, sample.mask_label);
    }
    return t;
}

}  // namespace detail

// Mean losses over a sample batch. Samples without support at any of the
// seven probe points are skipped and counted; if every sample is skipped the
// batch is unusable. Fields without a mask head contribute no mask loss (the
// mask mean runs over samples that produced a logit).
template <typename Field>
BatchLoss compute_losses(const std::vector<QuerySample>& samples, const Field& field,
                         const TrainConfig& cfg) {
    if (samples.empty()) throw InvalidSpecError("loss over an empty sample batch");
    BatchLoss out;
    double sum_sdf = 0.0, sum_eik = 0.0, sum_lap = 0.0, sum_mask = 0.0;
    int mask_count = 0;
    for (const QuerySample& s : samples) {
        const auto ev = detail::probe_sample(field, s.position, cfg.fd_step);
        if (!ev.supported) {
            ++out.skipped;
            continue;
        }
        ++out.used;
        const auto t = detail::sample_terms(ev, s, cfg.fd_step);
        sum_sdf += t.l_sdf;
        sum_eik += t.l_eikonal;
        sum_lap += t.l_laplacian;
        if (t.has_mask) {
            sum_mask += t.l_mask;
            ++mask_count;
        }
    }
    if (out.used == 0)
        throw AllUnsupportedError("every sample in the batch lacks field support");
    const double n = double(out.used);
    out.loss = combine_losses(cfg, sum_sdf / n, sum_eik / n,
                              mask_count > 0 ? sum_mask / double(mask_count) : 0.0,
                              sum_lap / n);
    return out;
}

}  // namespace sfr
