// Run orchestration shared by the CLI and the integration tests: a RunConfig
// bundling every knob, reconstruction paths (training-free IMLS, trained
// decoder, and code-range segmented runs), CSV emission with stable
// formatting, scene JSON, and run manifests.
#pragma once

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfr/core.hpp"
#include "sfr/curves.hpp"
#include "sfr/field.hpp"
#include "sfr/io.hpp"
#include "sfr/mesher.hpp"
#include "sfr/metrics.hpp"
#include "sfr/pyramid.hpp"
#include "sfr/scene.hpp"
#include "sfr/spatial.hpp"
#include "sfr/train.hpp"

namespace sfr {

// Defaults mirror the declared constants: 0.01 m serialization grid, k = 8,
// four pyramid levels, loss weights (300, 10, 150), f-score delta 0.010 m.
struct RunConfig {
    CurveKind kind = CurveKind::Hilbert;
    CurveParams curve;            // origin is refitted per cloud
    NeighborQueryConfig query;    // k=8, window 2k, per-level r_max
    int pyramid_levels = 4;
    double base_pool = 0.02;
    std::string decoder = "imls";  // "imls" or a decoder weight file
    ExtractionConfig extraction;
    TrainConfig train;
    double fscore_delta = 0.010;
    std::uint64_t seed = 1;
    int segments = 1;
    int eval_samples = 100000;
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// r_max for single-index (non-pyramid) queries: 8x the base pooling size
// unless pinned, matching the per-level convention at the finest scale used
// for reconstruction.
inline NeighborQueryConfig flat_query_config(const RunConfig& cfg) {
    NeighborQueryConfig q = cfg.query;
    if (q.r_max <= 0.0) q.r_max = 8.0 * cfg.base_pool;
    return q;
}

inline Aabb extraction_bounds(const PointCloud& cloud, const ExtractionConfig& ext) {
    if (!ext.bounds.degenerate()) return ext.bounds;
    return Aabb::of_points(cloud.positions).padded(4.0 * ext.cell);
}

// Training-free reconstruction: serialized neighborhoods + IMLS over oriented
// points. Normals are estimated when the cloud carries none.
inline Mesh reconstruct_imls(const PointCloud& input, const RunConfig& cfg) {
    if (input.positions.empty()) throw EmptyCloudError("reconstruct over an empty cloud");
    PointCloud cloud = input;
    if (!cloud.has_normals()) cloud = estimate_local_geometry(cloud, 16);

    const CurveParams params =
        fit_params(cloud.positions, cfg.curve.grid_size, cfg.curve.bits);
    const SerializedIndex index = build_index(cloud.positions, params, cfg.kind);
    const ImlsField field{&cloud, &index, flat_query_config(cfg)};

    ExtractionConfig ext = cfg.extraction;
    ext.bounds = extraction_bounds(cloud, ext);
    ext.mask_gate = false;  // no classifier on the analytic path
    return extract_mesh(field, ext);
}

// Reconstruction with a trained decoder over the feature pyramid.
inline Mesh reconstruct_decoder(const PointCloud& input, const DecoderParams& params,
                                const RunConfig& cfg) {
    if (input.positions.empty()) throw EmptyCloudError("reconstruct over an empty cloud");
    PointCloud cloud = input;
    PyramidOptions opt;
    opt.levels = params.level_count();
    opt.base_pool = cfg.base_pool;
    opt.kind = cfg.kind;
    const FeaturePyramid pyramid = build_pyramid(std::move(cloud), opt, cfg.curve);
    const DecoderField field{&pyramid, &params, cfg.query, cfg.train.sdf_scale};

    ExtractionConfig ext = cfg.extraction;
    ext.bounds = extraction_bounds(pyramid.levels[0].cloud, ext);
    return extract_mesh(field, ext);
}

namespace detail {

inline void append_mesh(Mesh& into, const Mesh& part) {
    const std::int32_t offset = std::int32_t(into.vertices.size());
    into.vertices.insert(into.vertices.end(), part.vertices.begin(), part.vertices.end());
    for (const auto& t : part.triangles)
        into.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
}

}  // namespace detail

// Scene partitioning by serialization codes: the cloud is split into n
// contiguous code ranges, each segment is reconstructed from its own points
// only (no message passing across segments), and extraction is restricted to
// the cells each segment owns — the code interval between its boundary codes,
// dilated by one cell ring so seams stay closed. Segment meshes are merged.
inline Mesh reconstruct_segmented(const PointCloud& input, const RunConfig& cfg,
                                  int n_segments) {
    if (n_segments <= 1) return reconstruct_imls(input, cfg);
    PointCloud cloud = input;
    if (!cloud.has_normals()) cloud = estimate_local_geometry(cloud, 16);

    const CurveParams params =
        fit_params(cloud.positions, cfg.curve.grid_size, cfg.curve.bits);
    const SerializedIndex full = build_index(cloud.positions, params, cfg.kind);
    const auto segments = partition_segments(full, n_segments);

    // Half-open owner code intervals from the boundary codes of the sorted
    // order; the first extends to 0 and the last to the top of the code space.
    std::vector<CurveCode> starts(segments.size() + 1);
    starts[0] = 0;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (s > 0) starts[s] = full.codes[pos];
        pos += segments[s].size();
    }
    starts[segments.size()] = ~CurveCode{0};

    const double cell = cfg.extraction.cell;
    Mesh merged;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (segments[s].empty()) continue;
        PointCloud part;
        part.positions.reserve(segments[s].size());
        part.normals.reserve(segments[s].size());
        for (std::int32_t i : segments[s]) {
            part.positions.push_back(cloud.positions[std::size_t(i)]);
            part.normals.push_back(cloud.normals[std::size_t(i)]);
        }
        const SerializedIndex index = build_index(part.positions, params, cfg.kind);
        const ImlsField field{&part, &index, flat_query_config(cfg)};

        ExtractionConfig ext = cfg.extraction;
        ext.bounds = Aabb::of_points(part.positions).padded(6.0 * cell);
        ext.mask_gate = false;
        const CurveCode lo = starts[s];
        const CurveCode hi = starts[s + 1];
        ext.cell_filter = [&params, &cfg, lo, hi, cell](const Vec3& center) {
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dz = -1; dz <= 1; ++dz) {
                        const Vec3 probe = center + Vec3{double(dx), double(dy),
                                                         double(dz)} * cell;
                        const CurveCode code = encode_cell(
                            quantize_clamped(probe, params), params.bits, cfg.kind);
                        if (code >= lo && code < hi) return true;
                    }
            return false;
        };
        detail::append_mesh(merged, extract_mesh(field, ext));
    }
    return merged;
}

// ---------------------------------------------------------------------------
// CSV + JSON artifacts. Numbers print with %.17g so identical runs produce
// byte-identical files.

inline std::string recall_table_csv(const RecallTable& table, std::uint64_t seed) {
    std::string out = "scales,curve,recall,k,window,seed\n";
    for (int col = 0; col < 2; ++col) {
        const char* curve = col == RecallTable::kHilbert ? "hilbert" : "morton";
        for (std::size_t m = 0; m < table.values.size(); ++m) {
            out += std::to_string(m) + "," + curve + "," +
                   detail::fmt_double(table.values[m][std::size_t(col)]) + "," +
                   std::to_string(table.k) + "," + std::to_string(table.window) + "," +
                   std::to_string(seed) + "\n";
        }
    }
    return out;
}

inline std::string eval_report_csv(const ChamferReport& report, double f, double delta,
                                   std::size_t n_pred, std::size_t n_gt,
                                   std::uint64_t seed) {
    std::string out = "cd,completeness,accuracy,fscore,delta,n_pred,n_gt,seed\n";
    out += detail::fmt_double(report.cd) + "," + detail::fmt_double(report.completeness) +
           "," + detail::fmt_double(report.accuracy) + "," + detail::fmt_double(f) + "," +
           detail::fmt_double(delta) + "," + std::to_string(n_pred) + "," +
           std::to_string(n_gt) + "," + std::to_string(seed) + "\n";
    return out;
}

inline std::string loss_trace_csv(const std::vector<double>& trace) {
    std::string out = "step,total\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        out += std::to_string(i) + "," + detail::fmt_double(trace[i]) + "\n";
    return out;
}

// Paper-convention summary: chamfer numbers also shown x10^-2.
inline std::string eval_report_text(const ChamferReport& report, double f, double delta) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "cd %.6f m (%.4f x1e-2)  completeness %.6f m  accuracy %.6f m  "
                  "f-score(delta=%.3f) %.4f\n",
                  report.cd, report.cd * 100.0, report.completeness, report.accuracy,
                  delta, f);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    detail::AtomicWriter writer(path);
    writer.stream() << text;
    writer.commit();
}

// ---------------------------------------------------------------------------
// Scene JSON.

inline SceneSpec scene_from_json(const nlohmann::json& j) {
    SceneSpec spec;
    if (!j.contains("primitives") || !j["primitives"].is_array() ||
        j["primitives"].empty())
        throw InvalidSpecError("scene json needs a non-empty 'primitives' array");
    auto vec3_of = [](const nlohmann::json& a) {
        if (!a.is_array() || a.size() != 3)
            throw InvalidSpecError("expected a 3-element array");
        return Vec3{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
    };
    for (const auto& p : j["primitives"]) {
        const std::string type = p.value("type", "");
        if (type == "sphere") {
            spec.primitives.push_back(
                SpherePrimitive{vec3_of(p.at("center")), p.at("radius").get<double>()});
        } else if (type == "box") {
            spec.primitives.push_back(BoxPrimitive{vec3_of(p.at("center")),
                                                   vec3_of(p.at("half_extents"))});
        } else if (type == "torus") {
            spec.primitives.push_back(TorusPrimitive{vec3_of(p.at("center")),
                                                     p.at("major_radius").get<double>(),
                                                     p.at("minor_radius").get<double>()});
        } else {
            throw InvalidSpecError("unknown primitive type '" + type + "'");
        }
    }
    spec.count = j.value("count", spec.count);
    spec.sigma = j.value("sigma", spec.sigma);
    const std::string mode = j.value("sampling", "uniform");
    if (mode == "uniform") spec.sampling = SamplingMode::Uniform;
    else if (mode == "nonuniform") spec.sampling = SamplingMode::NonUniform;
    else throw InvalidSpecError("sampling must be 'uniform' or 'nonuniform'");
    spec.seed = j.value("seed", spec.seed);
    spec.block_difference = j.value("block_difference", spec.block_difference);
    spec.pad = j.value("pad", spec.pad);
    return spec;
}

inline SceneSpec load_scene_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return scene_from_json(j);
}

inline nlohmann::json scene_to_json(const SceneSpec& spec) {
    nlohmann::json j;
    for (const auto& prim : spec.primitives) {
        nlohmann::json p;
        std::visit(
            [&p](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, SpherePrimitive>) {
                    p["type"] = "sphere";
                    p["center"] = {v.center.x, v.center.y, v.center.z};
                    p["radius"] = v.radius;
                } else if constexpr (std::is_same_v<T, BoxPrimitive>) {
                    p["type"] = "box";
                    p["center"] = {v.center.x, v.center.y, v.center.z};
                    p["half_extents"] = {v.half_extents.x, v.half_extents.y,
                                         v.half_extents.z};
                } else {
                    p["type"] = "torus";
                    p["center"] = {v.center.x, v.center.y, v.center.z};
                    p["major_radius"] = v.major;
                    p["minor_radius"] = v.minor;
                }
            },
            prim);
        j["primitives"].push_back(p);
    }
    j["count"] = spec.count;
    j["sigma"] = spec.sigma;
    j["sampling"] = spec.sampling == SamplingMode::Uniform ? "uniform" : "nonuniform";
    j["seed"] = spec.seed;
    j["block_difference"] = spec.block_difference;
    j["pad"] = spec.pad;
    return j;
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["curve"] = to_string(cfg.kind);
    j["grid_size"] = cfg.curve.grid_size;
    j["bits"] = cfg.curve.bits;
    j["k"] = cfg.query.k;
    j["window"] = cfg.query.effective_window();
    j["r_max"] = cfg.query.r_max;
    j["pyramid_levels"] = cfg.pyramid_levels;
    j["base_pool"] = cfg.base_pool;
    j["decoder"] = cfg.decoder;
    j["cell"] = cfg.extraction.cell;
    j["mask_gate"] = cfg.extraction.mask_gate;
    j["mask_threshold"] = cfg.extraction.mask_threshold;
    j["lambda_sdf"] = cfg.train.lambda_sdf;
    j["lambda_eikonal"] = cfg.train.lambda_eikonal;
    j["lambda_mask"] = cfg.train.lambda_mask;
    j["lambda_laplacian"] = cfg.train.lambda_laplacian;
    j["mask_band"] = cfg.train.mask_band;
    j["learning_rate"] = cfg.train.learning_rate;
    j["steps"] = cfg.train.steps;
    j["batch_size"] = cfg.train.batch_size;
    j["fd_step"] = cfg.train.fd_step;
    j["sdf_scale"] = cfg.train.sdf_scale;
    j["fscore_delta"] = cfg.fscore_delta;
    j["seed"] = cfg.seed;
    j["segments"] = cfg.segments;
    j["eval_samples"] = cfg.eval_samples;
    return j;
}

// Manifest beside every artifact: command, config echo, seed, version. The
// timestamp lives in its own field so the rest of the document is
// reproducible byte for byte.
inline void write_manifest(const std::filesystem::path& path, const std::string& command,
                           const RunConfig& cfg, const nlohmann::json& extra = {}) {
    nlohmann::json j;
    j["tool"] = "sfr";
    j["version"] = kVersion;
    j["command"] = command;
    j["seed"] = cfg.seed;
    j["config"] = run_config_to_json(cfg);
    if (!extra.is_null() && !extra.empty()) j["extra"] = extra;
    j["timestamp"] = []() {
        char buf[32];
        const std::time_t now = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return std::string(buf);
    }();
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace sfr
