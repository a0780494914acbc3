// Command-line surface: gen / index / neighbors-bench / reconstruct / train /
// eval / segment. Every run writes a manifest (config echo + seed + version)
// beside its outputs; module errors map to a machine-readable category on
// stderr and a nonzero exit.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "sfr/sfr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path manifest_path(const fs::path& out) {
    return fs::path(out.string() + ".manifest.json");
}

sfr::CurveKind parse_kind(const std::string& name) {
    if (name == "hilbert") return sfr::CurveKind::Hilbert;
    if (name == "morton" || name == "zorder" || name == "z-order")
        return sfr::CurveKind::Morton;
    throw sfr::InvalidSpecError("unknown curve '" + name + "' (hilbert|morton)");
}

struct CommonOpts {
    std::string curve = "hilbert";
    double grid_size = 0.01;
    int bits = 21;
    int k = 8;
    int window = 0;
    double r_max = 0.0;
    int levels = 4;
    double base_pool = 0.02;
    std::uint64_t seed = 1;
    int threads = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--curve", curve, "space-filling curve (hilbert|morton)");
        cmd->add_option("--grid", grid_size, "serialization grid size, meters");
        cmd->add_option("--bits", bits, "per-axis curve bit depth");
        cmd->add_option("--k", k, "neighbors per level");
        cmd->add_option("--window", window, "1D search half-width (0 = 2k)");
        cmd->add_option("--r-max", r_max, "false-positive cutoff, meters (0 = auto)");
        cmd->add_option("--levels", levels, "pyramid level count");
        cmd->add_option("--base-pool", base_pool, "level-1 pooling grid, meters");
        cmd->add_option("--seed", seed, "run seed");
        cmd->add_option("--threads", threads, "worker threads (default 1)");
    }

    sfr::RunConfig to_config() const {
        sfr::RunConfig cfg;
        cfg.kind = parse_kind(curve);
        cfg.curve.grid_size = grid_size;
        cfg.curve.bits = bits;
        cfg.query.k = k;
        cfg.query.window = window;
        cfg.query.r_max = r_max;
        cfg.pyramid_levels = levels;
        cfg.base_pool = base_pool;
        cfg.seed = seed;
        if (threads > 0) setenv("SFR_THREADS", std::to_string(threads).c_str(), 1);
        return cfg;
    }
};

int run_gen(const std::string& scene_path, const std::string& out,
            const CommonOpts& common, std::int64_t seed_override) {
    sfr::SceneSpec spec = sfr::load_scene_spec(scene_path);
    if (seed_override >= 0) spec.seed = std::uint64_t(seed_override);
    const sfr::GeneratedScene scene = sfr::generate_scene(spec);
    sfr::save_cloud_ply(out, scene.cloud);

    sfr::RunConfig cfg = common.to_config();
    cfg.seed = spec.seed;
    json extra;
    extra["scene"] = sfr::scene_to_json(spec);
    extra["points"] = scene.cloud.size();
    sfr::write_manifest(manifest_path(out), "gen", cfg, extra);
    std::cout << "wrote " << out << " (" << scene.cloud.size() << " points)\n";
    return 0;
}

int run_index(const std::string& cloud_path, const std::string& out,
              const CommonOpts& common) {
    const sfr::PointCloud cloud = sfr::load_cloud(cloud_path);
    sfr::RunConfig cfg = common.to_config();
    const sfr::CurveParams params =
        sfr::fit_params(cloud.positions, cfg.curve.grid_size, cfg.curve.bits);
    const sfr::SerializedIndex index =
        sfr::build_index(cloud.positions, params, cfg.kind);

    std::string csv = "sorted_pos,code,point_index\n";
    for (std::size_t i = 0; i < index.size(); ++i)
        csv += std::to_string(i) + "," + std::to_string(index.codes[i]) + "," +
               std::to_string(index.perm[i]) + "\n";
    sfr::write_text_file(out, csv);
    sfr::write_manifest(manifest_path(out), "index", cfg,
                        {{"cloud", cloud_path}, {"points", cloud.size()}});
    std::cout << "wrote " << out << "\n";
    return 0;
}

int run_neighbors_bench(const std::string& cloud_path, const std::string& out,
                        int queries, const CommonOpts& common) {
    const sfr::PointCloud cloud = sfr::load_cloud(cloud_path);
    sfr::RunConfig cfg = common.to_config();

    std::mt19937_64 rng(cfg.seed);
    const sfr::Aabb box = sfr::Aabb::of_points(cloud.positions);
    std::uniform_real_distribution<double> ux(box.lo.x, box.hi.x);
    std::uniform_real_distribution<double> uy(box.lo.y, box.hi.y);
    std::uniform_real_distribution<double> uz(box.lo.z, box.hi.z);
    std::vector<sfr::Vec3> qs(static_cast<std::size_t>(queries));
    for (auto& q : qs) q = {ux(rng), uy(rng), uz(rng)};

    const sfr::RecallTable table = sfr::recall_benchmark(
        cloud, cfg.pyramid_levels, cfg.base_pool, qs, cfg.query, cfg.curve);
    sfr::write_text_file(out, sfr::recall_table_csv(table, cfg.seed));
    sfr::write_manifest(manifest_path(out), "neighbors-bench", cfg,
                        {{"cloud", cloud_path}, {"queries", queries}});
    std::cout << "wrote " << out << "\n";
    return 0;
}

int run_reconstruct(const std::string& cloud_path, const std::string& out,
                    const std::string& decoder, double cell, bool mask_gate,
                    int segments, double sdf_scale, const CommonOpts& common) {
    const sfr::PointCloud cloud = sfr::load_cloud(cloud_path);
    sfr::RunConfig cfg = common.to_config();
    cfg.decoder = decoder;
    cfg.extraction.cell = cell;
    cfg.extraction.mask_gate = mask_gate;
    cfg.segments = segments;
    cfg.train.sdf_scale = sdf_scale;

    sfr::Mesh mesh;
    if (decoder == "imls") {
        mesh = segments > 1 ? sfr::reconstruct_segmented(cloud, cfg, segments)
                            : sfr::reconstruct_imls(cloud, cfg);
    } else {
        if (segments > 1)
            throw sfr::InvalidSpecError(
                "segmented reconstruction currently supports the imls decoder");
        const sfr::DecoderParams params = sfr::load_decoder(decoder);
        cfg.pyramid_levels = params.level_count();
        mesh = sfr::reconstruct_decoder(cloud, params, cfg);
    }

    const fs::path out_path(out);
    if (out_path.extension() == ".obj") sfr::save_mesh_obj(out_path, mesh);
    else sfr::save_mesh_ply(out_path, mesh);
    sfr::write_manifest(manifest_path(out), "reconstruct", cfg,
                        {{"cloud", cloud_path},
                         {"vertices", mesh.vertices.size()},
                         {"triangles", mesh.triangles.size()}});
    std::cout << "wrote " << out << " (" << mesh.vertices.size() << " vertices, "
              << mesh.triangles.size() << " triangles)\n";
    return 0;
}

int run_train(const std::vector<std::string>& scene_paths, const std::string& out,
              const std::string& trace_path, sfr::TrainConfig train, int near_count,
              int uniform_count, int hidden, const CommonOpts& common) {
    sfr::RunConfig cfg = common.to_config();
    cfg.train = train;
    cfg.decoder = out;

    std::vector<sfr::GeneratedScene> scenes;
    std::vector<sfr::FeaturePyramid> pyramids;
    scenes.reserve(scene_paths.size());
    for (const auto& path : scene_paths)
        scenes.push_back(sfr::generate_scene(sfr::load_scene_spec(path)));

    sfr::PyramidOptions popt;
    popt.levels = cfg.pyramid_levels;
    popt.base_pool = cfg.base_pool;
    popt.kind = cfg.kind;
    pyramids.reserve(scenes.size());
    for (auto& s : scenes) {
        sfr::PointCloud cloud = s.cloud;
        pyramids.push_back(sfr::build_pyramid(std::move(cloud), popt, cfg.curve));
    }

    std::vector<sfr::TrainScene> train_scenes(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        train_scenes[i].pyramid = &pyramids[i];
        train_scenes[i].samples = sfr::sample_training_queries(
            scenes[i].oracle, {near_count, uniform_count}, train,
            train.seed + 101 * (i + 1));
    }

    const sfr::DecoderParams init = sfr::DecoderParams::random_init(
        sfr::kLocalFeatureDim, cfg.pyramid_levels, hidden, train.seed);
    const sfr::TrainResult result =
        sfr::train_decoder(train_scenes, init, cfg.query, train);

    sfr::save_decoder(out, result.params);
    sfr::save_decoder_text(out + ".txt", result.params);
    if (!trace_path.empty())
        sfr::write_text_file(trace_path, sfr::loss_trace_csv(result.loss_trace));

    json extra;
    extra["scenes"] = scene_paths;
    extra["near_count"] = near_count;
    extra["uniform_count"] = uniform_count;
    extra["hidden"] = hidden;
    if (!result.loss_trace.empty()) {
        extra["initial_loss"] = result.loss_trace.front();
        extra["final_loss"] = result.loss_trace.back();
    }
    sfr::write_manifest(manifest_path(out), "train", cfg, extra);
    std::cout << "wrote " << out;
    if (!result.loss_trace.empty())
        std::cout << " (loss " << result.loss_trace.front() << " -> "
                  << result.loss_trace.back() << ")";
    std::cout << "\n";
    return 0;
}

int run_eval(const std::string& mesh_path, const std::string& gt_path,
             const std::string& out, double delta, int samples,
             const CommonOpts& common) {
    sfr::RunConfig cfg = common.to_config();
    cfg.fscore_delta = delta;
    cfg.eval_samples = samples;

    const sfr::Mesh mesh = sfr::load_mesh_ply(mesh_path);
    const sfr::PointCloud gt = sfr::load_cloud(gt_path);
    const std::vector<sfr::Vec3> pred =
        sfr::sample_surface(mesh, std::size_t(samples), cfg.seed);

    const sfr::ChamferReport report = sfr::chamfer_l1(pred, gt.positions);
    const double f = sfr::fscore(pred, gt.positions, delta);

    sfr::write_text_file(out, sfr::eval_report_csv(report, f, delta, pred.size(),
                                                   gt.positions.size(), cfg.seed));
    sfr::write_manifest(manifest_path(out), "eval", cfg,
                        {{"mesh", mesh_path}, {"gt", gt_path}});
    std::cout << sfr::eval_report_text(report, f, delta);
    return 0;
}

int run_segment(const std::string& cloud_path, int n, const std::string& prefix,
                const CommonOpts& common) {
    const sfr::PointCloud cloud = sfr::load_cloud(cloud_path);
    sfr::RunConfig cfg = common.to_config();
    cfg.segments = n;
    const sfr::CurveParams params =
        sfr::fit_params(cloud.positions, cfg.curve.grid_size, cfg.curve.bits);
    const sfr::SerializedIndex index =
        sfr::build_index(cloud.positions, params, cfg.kind);
    const auto segments = sfr::partition_segments(index, n);

    json files = json::array();
    for (std::size_t s = 0; s < segments.size(); ++s) {
        sfr::PointCloud part;
        for (std::int32_t i : segments[s]) {
            part.positions.push_back(cloud.positions[std::size_t(i)]);
            if (cloud.has_normals())
                part.normals.push_back(cloud.normals[std::size_t(i)]);
        }
        char name[32];
        std::snprintf(name, sizeof(name), "_%03zu.ply", s);
        const std::string path = prefix + name;
        sfr::save_cloud_ply(path, part);
        files.push_back(path);
    }
    sfr::write_manifest(manifest_path(prefix + ".segments"), "segment", cfg,
                        {{"cloud", cloud_path}, {"files", files}});
    std::cout << "wrote " << segments.size() << " segment files\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"surface reconstruction from point clouds via space-filling-curve "
                 "serialization"};
    app.require_subcommand(1);

    CommonOpts common;

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic scene cloud");
    std::string gen_scene, gen_out;
    std::int64_t gen_seed = -1;
    gen->add_option("--scene", gen_scene, "scene spec json")->required();
    gen->add_option("--out", gen_out, "output cloud (.ply)")->required();
    gen->add_option("--override-seed", gen_seed, "override the scene seed");
    common.attach(gen);

    // index
    auto* index = app.add_subcommand("index", "build a serialized index, dump codes");
    std::string index_cloud, index_out;
    index->add_option("--cloud", index_cloud, "input cloud")->required();
    index->add_option("--out", index_out, "output csv")->required();
    common.attach(index);

    // neighbors-bench
    auto* bench = app.add_subcommand("neighbors-bench", "recall benchmark vs exact knn");
    std::string bench_cloud, bench_out;
    int bench_queries = 1000;
    bench->add_option("--cloud", bench_cloud, "input cloud")->required();
    bench->add_option("--out", bench_out, "output csv")->required();
    bench->add_option("--queries", bench_queries, "query count");
    common.attach(bench);

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "extract a mesh from a cloud");
    std::string rec_cloud, rec_out, rec_decoder = "imls";
    double rec_cell = 0.02, rec_sdf_scale = 0.5;
    bool rec_mask_gate = false;
    int rec_segments = 1;
    rec->add_option("--cloud", rec_cloud, "input cloud")->required();
    rec->add_option("--out", rec_out, "output mesh (.ply or .obj)")->required();
    rec->add_option("--decoder", rec_decoder, "'imls' or decoder weight file");
    rec->add_option("--cell", rec_cell, "extraction cell size, meters");
    rec->add_flag("--mask-gate", rec_mask_gate, "skip cells the classifier marks far");
    rec->add_option("--segments", rec_segments, "code-range segments (1 = whole scene)");
    rec->add_option("--sdf-scale", rec_sdf_scale, "tanh output scale, meters");
    common.attach(rec);

    // train
    auto* train = app.add_subcommand("train", "train the decoder on synthetic scenes");
    std::vector<std::string> train_scenes;
    std::string train_out, train_trace;
    sfr::TrainConfig train_cfg;
    int train_near = 4000, train_uniform = 2000, train_hidden = 32;
    train->add_option("--scene", train_scenes, "scene spec json (repeatable)")
        ->required()
        ->take_all();
    train->add_option("--out", train_out, "output decoder file")->required();
    train->add_option("--trace", train_trace, "loss trace csv");
    train->add_option("--steps", train_cfg.steps, "optimizer steps");
    train->add_option("--batch", train_cfg.batch_size, "batch size");
    train->add_option("--lr", train_cfg.learning_rate, "learning rate");
    train->add_option("--lambda-sdf", train_cfg.lambda_sdf, "sdf loss weight");
    train->add_option("--lambda-eikonal", train_cfg.lambda_eikonal, "eikonal weight");
    train->add_option("--lambda-mask", train_cfg.lambda_mask, "mask weight");
    train->add_option("--lambda-laplacian", train_cfg.lambda_laplacian,
                      "laplacian weight");
    train->add_option("--mask-band", train_cfg.mask_band, "near/far band, meters");
    train->add_option("--fd-step", train_cfg.fd_step, "finite-difference h, meters");
    train->add_option("--sdf-scale", train_cfg.sdf_scale, "tanh output scale, meters");
    train->add_option("--train-seed", train_cfg.seed, "training seed");
    train->add_option("--near", train_near, "near-surface samples per scene");
    train->add_option("--uniform", train_uniform, "uniform samples per scene");
    train->add_option("--hidden", train_hidden, "decoder hidden width");
    common.attach(train);

    // eval
    auto* eval = app.add_subcommand("eval", "chamfer + f-score of a mesh vs gt points");
    std::string eval_mesh, eval_gt, eval_out;
    double eval_delta = 0.010;
    int eval_samples = 100000;
    eval->add_option("--mesh", eval_mesh, "reconstructed mesh (.ply)")->required();
    eval->add_option("--gt", eval_gt, "ground-truth point cloud")->required();
    eval->add_option("--out", eval_out, "output csv")->required();
    eval->add_option("--delta", eval_delta, "f-score threshold, meters");
    eval->add_option("--samples", eval_samples, "points sampled on the mesh");
    common.attach(eval);

    // segment
    auto* seg = app.add_subcommand("segment", "split a cloud into code-range segments");
    std::string seg_cloud, seg_prefix;
    int seg_n = 10;
    seg->add_option("--cloud", seg_cloud, "input cloud")->required();
    seg->add_option("--n", seg_n, "segment count");
    seg->add_option("--out-prefix", seg_prefix, "output file prefix")->required();
    common.attach(seg);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen(gen_scene, gen_out, common, gen_seed);
        if (index->parsed()) return run_index(index_cloud, index_out, common);
        if (bench->parsed())
            return run_neighbors_bench(bench_cloud, bench_out, bench_queries, common);
        if (rec->parsed())
            return run_reconstruct(rec_cloud, rec_out, rec_decoder, rec_cell,
                                   rec_mask_gate, rec_segments, rec_sdf_scale, common);
        if (train->parsed())
            return run_train(train_scenes, train_out, train_trace, train_cfg,
                             train_near, train_uniform, train_hidden, common);
        if (eval->parsed())
            return run_eval(eval_mesh, eval_gt, eval_out, eval_delta, eval_samples,
                            common);
        if (seg->parsed()) return run_segment(seg_cloud, seg_n, seg_prefix, common);
    } catch (const sfr::Error& e) {
        nlohmann::json err;
        err["error"] = e.category();
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = "internal";
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 2;
    }
    return 0;
}
