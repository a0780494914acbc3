#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "sfr/spatial.hpp"

using namespace sfr;

namespace {

std::vector<Vec3> random_cloud(std::size_t n, std::uint64_t seed, double extent = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(0.0, extent);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {coord(rng), coord(rng), coord(rng)};
    return pts;
}

// Independent selection sort over (code, index) pairs.
std::vector<std::int32_t> selection_sort_oracle(const std::vector<CurveCode>& codes) {
    std::vector<std::int32_t> order(codes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = std::int32_t(i);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        std::size_t best = i;
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            const auto a = codes[std::size_t(order[j])];
            const auto b = codes[std::size_t(order[best])];
            if (a < b || (a == b && order[j] < order[best])) best = j;
        }
        std::swap(order[i], order[best]);
    }
    return order;
}

}  // namespace

TEST_CASE("build_index sorts codes with a stable tie-break", "[spatial]") {
    CurveParams params;

    SECTION("one point") {
        const std::vector<Vec3> pts{{0.5, 0.5, 0.5}};
        const auto index = build_index(pts, params, CurveKind::Hilbert);
        REQUIRE(index.codes.size() == 1);
        CHECK(index.perm == std::vector<std::int32_t>{0});
    }
    SECTION("curve-ordered input keeps the identity permutation") {
        auto pts = random_cloud(200, 3);
        auto index = build_index(pts, params, CurveKind::Hilbert);
        std::vector<Vec3> ordered;
        ordered.reserve(pts.size());
        for (std::int32_t i : index.perm) ordered.push_back(pts[std::size_t(i)]);
        const auto reindex = build_index(ordered, params, CurveKind::Hilbert);
        for (std::size_t i = 0; i < reindex.perm.size(); ++i)
            REQUIRE(reindex.perm[i] == std::int32_t(i));
    }
    SECTION("fixed-seed cloud matches a selection-sort oracle") {
        const auto pts = random_cloud(1000, 5);
        for (CurveKind kind : {CurveKind::Hilbert, CurveKind::Morton}) {
            const auto index = build_index(pts, params, kind);
            const auto codes = serialize_points(pts, params, kind);
            const auto expect = selection_sort_oracle(codes);
            REQUIRE(index.perm == expect);
            for (std::size_t i = 0; i < pts.size(); ++i)
                REQUIRE(index.codes[i] == codes[std::size_t(index.perm[i])]);
        }
    }
    SECTION("empty cloud is rejected") {
        const std::vector<Vec3> none;
        CHECK_THROWS_AS(build_index(none, params, CurveKind::Hilbert), EmptyCloudError);
    }
    SECTION("out-of-range point is rejected") {
        CurveParams small;
        small.bits = 4;
        const std::vector<Vec3> pts{{0.01, 0.01, 0.01}, {9.0, 0.0, 0.0}};
        CHECK_THROWS_AS(build_index(pts, small, CurveKind::Hilbert), OutOfRangeError);
    }
}

TEST_CASE("approx_neighbors windowed retrieval", "[spatial]") {
    CurveParams params;

    SECTION("coincident point comes back at distance zero") {
        const auto pts = random_cloud(500, 9);
        const auto index = build_index(pts, params, CurveKind::Hilbert);
        NeighborQueryConfig cfg;
        cfg.k = 1;
        const auto got = approx_neighbors(index, pts[123], cfg);
        REQUIRE(got.entries.size() == 1);
        CHECK(got.entries[0].index == 123);
        CHECK(got.entries[0].distance == 0.0);
    }
    SECTION("collinear flankers") {
        const std::vector<Vec3> pts{{0.10, 0.5, 0.5}, {0.15, 0.5, 0.5}, {0.20, 0.5, 0.5}};
        const auto index = build_index(pts, params, CurveKind::Hilbert);
        NeighborQueryConfig cfg;
        cfg.k = 2;
        cfg.window = 2;
        const auto got = approx_neighbors(index, {0.151, 0.5, 0.5}, cfg);
        const auto exact = exact_knn(pts, {0.151, 0.5, 0.5}, 2);
        REQUIRE(got.entries.size() == 2);
        CHECK(got.entries == exact.entries);
    }
    SECTION("r_max removes far candidates inside the window") {
        const std::vector<Vec3> pts{{0.5, 0.5, 0.5}, {1.5, 0.5, 0.5}};
        CurveParams wide = fit_params(pts);
        const auto index = build_index(pts, wide, CurveKind::Hilbert);
        NeighborQueryConfig cfg;
        cfg.k = 8;
        cfg.window = 10;
        cfg.r_max = 0.1;
        const auto got = approx_neighbors(index, {0.5, 0.5, 0.51}, cfg);
        REQUIRE(got.entries.size() == 1);
        CHECK(got.entries[0].index == 0);
    }
    SECTION("soundness: results are real points within r_max, sorted") {
        const auto pts = random_cloud(2000, 21);
        const auto index = build_index(pts, params, CurveKind::Morton);
        std::mt19937_64 rng(22);
        std::uniform_real_distribution<double> coord(-0.1, 1.1);
        NeighborQueryConfig cfg;
        cfg.k = 8;
        cfg.r_max = 0.2;
        for (int trial = 0; trial < 200; ++trial) {
            const Vec3 q{coord(rng), coord(rng), coord(rng)};
            const auto got = approx_neighbors(index, q, cfg);
            REQUIRE(got.entries.size() <= 8);
            double prev = -1.0;
            for (const auto& e : got.entries) {
                REQUIRE(e.index >= 0);
                REQUIRE(std::size_t(e.index) < pts.size());
                REQUIRE(e.distance <= cfg.r_max);
                REQUIRE(e.distance == (pts[std::size_t(e.index)] - q).norm());
                REQUIRE(e.distance >= prev);
                prev = e.distance;
            }
        }
    }
    SECTION("window enlargement never lowers recall") {
        const auto pts = random_cloud(3000, 31);
        const auto index = build_index(pts, params, CurveKind::Hilbert);
        std::mt19937_64 rng(32);
        std::uniform_real_distribution<double> coord(0.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            const Vec3 q{coord(rng), coord(rng), coord(rng)};
            const auto exact = exact_knn(pts, q, 8);
            double prev = -1.0;
            for (int window : {4, 8, 16, 32, 64}) {
                NeighborQueryConfig cfg;
                cfg.k = 8;
                cfg.window = window;
                const double r = recall_rate(approx_neighbors(index, q, cfg), exact);
                REQUIRE(r >= prev);
                prev = r;
            }
        }
    }
    SECTION("exhaustive window with unbounded r_max equals exact knn") {
        const auto pts = random_cloud(800, 41);
        const auto index = build_index(pts, params, CurveKind::Hilbert);
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> coord(0.0, 1.0);
        NeighborQueryConfig cfg;
        cfg.k = 8;
        cfg.window = int(pts.size());
        for (int trial = 0; trial < 100; ++trial) {
            const Vec3 q{coord(rng), coord(rng), coord(rng)};
            const auto got = approx_neighbors(index, q, cfg);
            const auto exact = exact_knn(pts, q, 8);
            REQUIRE(got.entries == exact.entries);
        }
    }
    SECTION("determinism across repeated runs") {
        const auto pts = random_cloud(1000, 51);
        const auto index = build_index(pts, params, CurveKind::Hilbert);
        NeighborQueryConfig cfg;
        const auto a = approx_neighbors(index, {0.3, 0.7, 0.2}, cfg);
        const auto b = approx_neighbors(index, {0.3, 0.7, 0.2}, cfg);
        REQUIRE(a.entries == b.entries);
    }
}

TEST_CASE("exact_knn is a faithful brute-force oracle", "[spatial]") {
    SECTION("k >= N returns everything sorted") {
        const auto pts = random_cloud(20, 61);
        const auto got = exact_knn(pts, {0.5, 0.5, 0.5}, 50);
        REQUIRE(got.entries.size() == pts.size());
        for (std::size_t i = 1; i < got.entries.size(); ++i)
            REQUIRE(got.entries[i - 1].distance <= got.entries[i].distance);
    }
    SECTION("coincident query puts distance zero first") {
        const auto pts = random_cloud(50, 71);
        const auto got = exact_knn(pts, pts[17], 3);
        CHECK(got.entries[0].index == 17);
        CHECK(got.entries[0].distance == 0.0);
    }
    SECTION("matches an independent full sort") {
        const auto pts = random_cloud(50, 81);
        std::mt19937_64 rng(82);
        std::uniform_real_distribution<double> coord(0.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            const Vec3 q{coord(rng), coord(rng), coord(rng)};
            std::vector<std::pair<double, std::int32_t>> all;
            for (std::size_t i = 0; i < pts.size(); ++i)
                all.emplace_back((pts[i] - q).norm(), std::int32_t(i));
            std::sort(all.begin(), all.end());
            const auto got = exact_knn(pts, q, 7);
            REQUIRE(got.entries.size() == 7);
            for (std::size_t i = 0; i < 7; ++i) {
                REQUIRE(got.entries[i].index == all[i].second);
                REQUIRE(got.entries[i].distance == all[i].first);
            }
        }
    }
}

TEST_CASE("recall_rate counts index overlap", "[spatial]") {
    NeighborSet a, b;
    a.entries = {{1, 0.1}, {2, 0.2}, {3, 0.3}};
    b.entries = {{1, 0.1}, {2, 0.2}, {3, 0.3}};
    CHECK(recall_rate(a, b) == 1.0);

    NeighborSet c;
    c.entries = {{7, 0.1}, {8, 0.2}};
    CHECK(recall_rate(c, b) == 0.0);

    NeighborSet partial;
    partial.entries = {{2, 0.2}, {9, 0.9}};
    CHECK(recall_rate(partial, b) == Catch::Approx(1.0 / 3.0));

    NeighborSet empty;
    CHECK_THROWS_AS(recall_rate(a, empty), ZeroDenominatorError);
}

TEST_CASE("partition_segments covers the curve order in near-equal runs",
          "[spatial]") {
    CurveParams params;
    const auto pts = random_cloud(1003, 91);
    const auto index = build_index(pts, params, CurveKind::Hilbert);

    SECTION("one segment is the whole cloud in curve order") {
        const auto segs = partition_segments(index, 1);
        REQUIRE(segs.size() == 1);
        REQUIRE(segs[0] == index.perm);
    }
    SECTION("N segments are singletons in curve order") {
        const auto segs = partition_segments(index, int(pts.size()));
        REQUIRE(segs.size() == pts.size());
        for (std::size_t i = 0; i < segs.size(); ++i) {
            REQUIRE(segs[i].size() == 1);
            REQUIRE(segs[i][0] == index.perm[i]);
        }
    }
    SECTION("10 segments: contiguous, balanced, disjoint cover") {
        const auto segs = partition_segments(index, 10);
        REQUIRE(segs.size() == 10);
        std::size_t min_sz = pts.size(), max_sz = 0, total = 0, pos = 0;
        std::vector<bool> seen(pts.size(), false);
        for (const auto& seg : segs) {
            min_sz = std::min(min_sz, seg.size());
            max_sz = std::max(max_sz, seg.size());
            total += seg.size();
            for (std::int32_t idx : seg) {
                REQUIRE(idx == index.perm[pos]);  // contiguous sorted positions
                REQUIRE(!seen[std::size_t(idx)]);
                seen[std::size_t(idx)] = true;
                ++pos;
            }
        }
        CHECK(total == pts.size());
        CHECK(max_sz - min_sz <= 1);
    }
}

TEST_CASE("hilbert recall beats morton on a uniform cloud", "[spatial][trend]") {
    const auto pts = random_cloud(20000, 101);
    CurveParams params;
    const auto hilbert = build_index(pts, params, CurveKind::Hilbert);
    const auto morton = build_index(pts, params, CurveKind::Morton);

    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    NeighborQueryConfig cfg;  // k=8, window 16
    cfg.r_max = 0.2;
    double sum_h = 0.0, sum_m = 0.0;
    const int queries = 1000;
    for (int i = 0; i < queries; ++i) {
        const Vec3 q{coord(rng), coord(rng), coord(rng)};
        const auto exact = exact_knn(pts, q, cfg.k);
        sum_h += recall_rate(approx_neighbors(hilbert, q, cfg), exact);
        sum_m += recall_rate(approx_neighbors(morton, q, cfg), exact);
    }
    INFO("hilbert " << sum_h / queries << " vs morton " << sum_m / queries);
    CHECK(sum_h >= sum_m);
}
