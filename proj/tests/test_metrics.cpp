#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "sfr/metrics.hpp"

using namespace sfr;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double extent = 1.0) {
    std::uniform_real_distribution<double> coord(0.0, extent);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {coord(rng), coord(rng), coord(rng)};
    return pts;
}

// Double-loop recomputation, summation in the same index order.
ChamferReport chamfer_oracle(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
    ChamferReport r;
    for (const Vec3& p : pred) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& g : gt) {
            const double dx = g.x - p.x, dy = g.y - p.y, dz = g.z - p.z;
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        r.accuracy += std::sqrt(best);
    }
    r.accuracy /= double(pred.size());
    for (const Vec3& g : gt) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& p : pred) {
            const double dx = p.x - g.x, dy = p.y - g.y, dz = p.z - g.z;
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        r.completeness += std::sqrt(best);
    }
    r.completeness /= double(gt.size());
    r.cd = 0.5 * (r.accuracy + r.completeness);
    return r;
}

double fscore_oracle(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                     double delta) {
    std::size_t hp = 0, hr = 0;
    for (const Vec3& p : pred) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& g : gt) best = std::min(best, (g - p).norm2());
        if (std::sqrt(best) <= delta) ++hp;
    }
    for (const Vec3& g : gt) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& p : pred) best = std::min(best, (p - g).norm2());
        if (std::sqrt(best) <= delta) ++hr;
    }
    const double precision = double(hp) / double(pred.size());
    const double recall = double(hr) / double(gt.size());
    return precision + recall == 0.0 ? 0.0
                                     : 2.0 * precision * recall / (precision + recall);
}

}  // namespace

TEST_CASE("chamfer_l1", "[metrics]") {
    SECTION("identical sets are zero") {
        std::mt19937_64 rng(3);
        const auto pts = random_points(50, rng);
        const ChamferReport r = chamfer_l1(pts, pts);
        CHECK(r.cd == 0.0);
        CHECK(r.completeness == 0.0);
        CHECK(r.accuracy == 0.0);
    }
    SECTION("worked example") {
        const std::vector<Vec3> pred{{0, 0, 0}};
        const std::vector<Vec3> gt{{1, 0, 0}, {0, 2, 0}};
        const ChamferReport r = chamfer_l1(pred, gt);
        CHECK(r.accuracy == Catch::Approx(1.0));
        CHECK(r.completeness == Catch::Approx(1.5));
        CHECK(r.cd == Catch::Approx(1.25));
    }
    SECTION("swapping arguments swaps the directed means") {
        std::mt19937_64 rng(5);
        const auto a = random_points(40, rng);
        const auto b = random_points(60, rng);
        const ChamferReport ab = chamfer_l1(a, b);
        const ChamferReport ba = chamfer_l1(b, a);
        CHECK(ab.accuracy == ba.completeness);
        CHECK(ab.completeness == ba.accuracy);
        CHECK(ab.cd == ba.cd);
    }
    SECTION("scale covariance") {
        std::mt19937_64 rng(7);
        const auto a = random_points(30, rng);
        const auto b = random_points(45, rng);
        const double alpha = 2.75;
        std::vector<Vec3> sa = a, sb = b;
        for (auto& p : sa) p *= alpha;
        for (auto& p : sb) p *= alpha;
        const ChamferReport r = chamfer_l1(a, b);
        const ChamferReport s = chamfer_l1(sa, sb);
        CHECK(s.cd == Catch::Approx(alpha * r.cd).epsilon(1e-12));
        CHECK(s.accuracy == Catch::Approx(alpha * r.accuracy).epsilon(1e-12));
        CHECK(s.completeness == Catch::Approx(alpha * r.completeness).epsilon(1e-12));
    }
    SECTION("empty sets are rejected") {
        const std::vector<Vec3> some{{0, 0, 0}};
        const std::vector<Vec3> none;
        CHECK_THROWS_AS(chamfer_l1(none, some), EmptySetError);
        CHECK_THROWS_AS(chamfer_l1(some, none), EmptySetError);
    }
}

TEST_CASE("fscore", "[metrics]") {
    SECTION("identical sets score one") {
        std::mt19937_64 rng(9);
        const auto pts = random_points(50, rng);
        CHECK(fscore(pts, pts, 0.001) == 1.0);
    }
    SECTION("worked example: P=1, R=0.5") {
        const std::vector<Vec3> pred{{0, 0, 0}};
        const std::vector<Vec3> gt{{1, 0, 0}, {0, 2, 0}};
        CHECK(fscore(pred, gt, 1.0) == Catch::Approx(2.0 / 3.0));
    }
    SECTION("separated sets score zero") {
        const std::vector<Vec3> pred{{0, 0, 0}};
        const std::vector<Vec3> gt{{100, 0, 0}};
        CHECK(fscore(pred, gt, 0.01) == 0.0);
    }
    SECTION("monotone in the threshold") {
        std::mt19937_64 rng(11);
        const auto a = random_points(60, rng);
        const auto b = random_points(60, rng);
        double prev = -1.0;
        for (double delta : {0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0}) {
            const double f = fscore(a, b, delta);
            REQUIRE(f >= prev);
            prev = f;
        }
    }
    SECTION("threshold covariance under scaling") {
        std::mt19937_64 rng(13);
        const auto a = random_points(30, rng);
        const auto b = random_points(30, rng);
        const double alpha = 3.0;
        std::vector<Vec3> sa = a, sb = b;
        for (auto& p : sa) p *= alpha;
        for (auto& p : sb) p *= alpha;
        CHECK(fscore(a, b, 0.2) == fscore(sa, sb, alpha * 0.2));
    }
}

TEST_CASE("metric oracle equivalence on random pairs", "[metrics]") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> size(1, 100);
    std::uniform_real_distribution<double> delta(0.05, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto pred = random_points(size(rng), rng);
        const auto gt = random_points(size(rng), rng);
        const ChamferReport fast = chamfer_l1(pred, gt);
        const ChamferReport slow = chamfer_oracle(pred, gt);
        REQUIRE(fast.accuracy == slow.accuracy);
        REQUIRE(fast.completeness == slow.completeness);
        REQUIRE(fast.cd == slow.cd);
        const double d = delta(rng);
        REQUIRE(fscore(pred, gt, d) == fscore_oracle(pred, gt, d));
    }
}

TEST_CASE("recall_benchmark", "[metrics]") {
    std::mt19937_64 rng(23);
    PointCloud cloud;
    cloud.positions = random_points(3000, rng);
    const auto queries = random_points(100, rng);

    SECTION("exhaustive window is a column of ones") {
        NeighborQueryConfig cfg;
        cfg.k = 8;
        cfg.window = int(cloud.size());
        cfg.r_max = 1e9;
        const RecallTable table = recall_benchmark(cloud, 4, 0.02, queries, cfg);
        REQUIRE(table.values.size() == 4);
        for (const auto& row : table.values) {
            CHECK(row[RecallTable::kHilbert] == 1.0);
            CHECK(row[RecallTable::kMorton] == 1.0);
        }
    }
    SECTION("values match a slow per-query recomputation") {
        NeighborQueryConfig cfg;  // defaults: k=8, window 16
        const int levels = 3;
        const RecallTable table = recall_benchmark(cloud, levels, 0.02, queries, cfg);

        for (int col = 0; col < 2; ++col) {
            const CurveKind kind =
                col == RecallTable::kHilbert ? CurveKind::Hilbert : CurveKind::Morton;
            PyramidOptions opt;
            opt.levels = levels;
            opt.base_pool = 0.02;
            opt.kind = kind;
            opt.with_features = false;
            PointCloud copy;
            copy.positions = cloud.positions;
            const FeaturePyramid pyr = build_pyramid(std::move(copy), opt);

            for (int m = 0; m < levels; ++m) {
                double acc = 0.0;
                for (const Vec3& q : queries) {
                    const auto exact = exact_knn(cloud.positions, q, cfg.k);
                    std::set<std::int32_t> gt_set, got;
                    for (const auto& e : exact.entries) gt_set.insert(e.index);
                    for (int s = 0; s <= m; ++s) {
                        const auto& level = pyr.levels[std::size_t(s)];
                        const auto approx =
                            approx_neighbors(level.index, q, level_query_config(cfg, level));
                        for (const auto& e : approx.entries) {
                            if (s == 0) {
                                got.insert(e.index);
                            } else {
                                for (std::int32_t i : level.members[std::size_t(e.index)])
                                    got.insert(i);
                            }
                        }
                    }
                    std::size_t hits = 0;
                    for (std::int32_t i : gt_set) hits += got.count(i);
                    acc += double(hits) / double(gt_set.size());
                }
                REQUIRE(table.values[std::size_t(m)][std::size_t(col)] ==
                        Catch::Approx(acc / double(queries.size())).margin(1e-12));
            }
        }
    }
    SECTION("recall is monotone in the scale count") {
        NeighborQueryConfig cfg;
        const RecallTable table = recall_benchmark(cloud, 4, 0.02, queries, cfg);
        for (int col = 0; col < 2; ++col)
            for (std::size_t m = 1; m < table.values.size(); ++m)
                REQUIRE(table.values[m][std::size_t(col)] >=
                        table.values[m - 1][std::size_t(col)]);
    }
}
