#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "sfr/curves.hpp"

using namespace sfr;

namespace {

// Independent bit-interleave oracle: one bit at a time, x -> 3i, y -> 3i+1,
// z -> 3i+2.
std::uint64_t interleave_oracle(GridCoord c, int bits) {
    std::uint64_t out = 0;
    for (int i = 0; i < bits; ++i) {
        out |= std::uint64_t((c.x >> i) & 1) << (3 * i);
        out |= std::uint64_t((c.y >> i) & 1) << (3 * i + 1);
        out |= std::uint64_t((c.z >> i) & 1) << (3 * i + 2);
    }
    return out;
}

// The 8-cell base curve from the reflected Gray code, reading bit 2 as x,
// bit 1 as y, bit 0 as z.
GridCoord gray_code_cell(std::uint64_t i) {
    const std::uint64_t g = i ^ (i >> 1);
    return {std::uint32_t((g >> 2) & 1), std::uint32_t((g >> 1) & 1),
            std::uint32_t(g & 1)};
}

int l1_distance(GridCoord a, GridCoord b) {
    auto d = [](std::uint32_t x, std::uint32_t y) {
        return x > y ? int(x - y) : int(y - x);
    };
    return d(a.x, b.x) + d(a.y, b.y) + d(a.z, b.z);
}

GridCoord random_coord(std::mt19937_64& rng, int bits) {
    std::uniform_int_distribution<std::uint32_t> dist(
        0, (std::uint32_t(1) << bits) - 1);
    return {dist(rng), dist(rng), dist(rng)};
}

}  // namespace

TEST_CASE("quantize floors into the grid", "[curves]") {
    CurveParams p;  // g = 0.01, origin 0

    SECTION("zero maps to the origin cell") {
        CHECK(quantize({0, 0, 0}, p) == GridCoord{0, 0, 0});
    }
    SECTION("floor arithmetic") {
        CHECK(quantize({0.014, 0.021, 0.005}, p) == GridCoord{1, 2, 0});
    }
    SECTION("origin shift admits negative clouds") {
        std::vector<Vec3> cloud{{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}};
        const CurveParams fitted = fit_params(cloud);
        CHECK(quantize({-0.5, -0.5, -0.5}, fitted) == GridCoord{0, 0, 0});
    }
    SECTION("out-of-cube points are rejected") {
        CurveParams small;
        small.bits = 4;
        CHECK_THROWS_AS(quantize({1.0, 0.0, 0.0}, small), OutOfRangeError);
        CHECK_THROWS_AS(quantize({-0.001, 0.0, 0.0}, small), OutOfRangeError);
    }
    SECTION("monotone in each axis") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> coord(0.0, 1.0);
        std::uniform_real_distribution<double> step(0.01, 0.5);
        for (int trial = 0; trial < 500; ++trial) {
            const Vec3 a{coord(rng), coord(rng), coord(rng)};
            const int axis = int(rng() % 3);
            Vec3 b = a;
            b[axis] += step(rng);
            const GridCoord ga = quantize(a, p), gb = quantize(b, p);
            const std::uint32_t xa = axis == 0 ? ga.x : (axis == 1 ? ga.y : ga.z);
            const std::uint32_t xb = axis == 0 ? gb.x : (axis == 1 ? gb.y : gb.z);
            REQUIRE(xb >= xa + 1);
        }
    }
}

TEST_CASE("morton encode matches the interleave oracle", "[curves]") {
    CHECK(morton_encode({0, 0, 0}, 4) == 0);
    CHECK(morton_encode({1, 2, 3}, 2) == 53);
    for (int bits : {1, 2, 3, 4}) {
        const std::uint32_t m = (std::uint32_t(1) << bits) - 1;
        CHECK(morton_encode({m, m, m}, bits) ==
              (std::uint64_t(1) << (3 * bits)) - 1);
    }

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        const GridCoord c = random_coord(rng, 21);
        CHECK(morton_encode(c, 21) == interleave_oracle(c, 21));
    }
}

TEST_CASE("morton decode inverts encode", "[curves]") {
    CHECK(morton_decode(0, 4) == GridCoord{0, 0, 0});
    CHECK(morton_decode(53, 2) == GridCoord{1, 2, 3});
    CHECK_THROWS_AS(morton_decode(std::uint64_t(1) << 6, 2), OutOfRangeError);

    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20000; ++trial) {
        const GridCoord c = random_coord(rng, 21);
        REQUIRE(morton_decode(morton_encode(c, 21), 21) == c);
    }
}

TEST_CASE("hilbert base curve is the Gray code", "[curves]") {
    CHECK(hilbert_encode({0, 0, 0}, 1) == 0);
    for (std::uint64_t i = 0; i < 8; ++i) {
        CHECK(hilbert_decode(i, 1) == gray_code_cell(i));
        if (i > 0)
            CHECK(l1_distance(hilbert_decode(i, 1), hilbert_decode(i - 1, 1)) == 1);
    }
}

TEST_CASE("hilbert bijection and locality", "[curves]") {
    SECTION("origin start") {
        for (int bits : {1, 2, 3, 4, 21})
            CHECK(hilbert_encode({0, 0, 0}, bits) == 0);
    }
    SECTION("round trip at bits=4") {
        CHECK(hilbert_decode(hilbert_encode({5, 9, 14}, 4), 4) == GridCoord{5, 9, 14});
    }
    SECTION("full curve covers every cell exactly once at bits<=3") {
        for (int bits : {1, 2, 3}) {
            const std::uint64_t cells = std::uint64_t(1) << (3 * bits);
            std::vector<bool> seen(cells, false);
            const std::uint32_t side = std::uint32_t(1) << bits;
            for (std::uint32_t x = 0; x < side; ++x)
                for (std::uint32_t y = 0; y < side; ++y)
                    for (std::uint32_t z = 0; z < side; ++z) {
                        const std::uint64_t code = hilbert_encode({x, y, z}, bits);
                        REQUIRE(code < cells);
                        REQUIRE(!seen[code]);
                        seen[code] = true;
                    }
        }
    }
    SECTION("consecutive codes decode to face-adjacent cells at bits=4") {
        GridCoord prev = hilbert_decode(0, 4);
        for (std::uint64_t i = 1; i < 4096; ++i) {
            const GridCoord cur = hilbert_decode(i, 4);
            REQUIRE(l1_distance(prev, cur) == 1);
            prev = cur;
        }
    }
    SECTION("random round trips at bits=21") {
        std::mt19937_64 rng(17);
        for (int trial = 0; trial < 20000; ++trial) {
            const GridCoord c = random_coord(rng, 21);
            REQUIRE(hilbert_decode(hilbert_encode(c, 21), 21) == c);
        }
    }
}

TEST_CASE("serialize_points composes quantize and encode", "[curves]") {
    CurveParams p;

    SECTION("single point") {
        const std::vector<Vec3> pts{{0.034, 0.012, 0.077}};
        const auto codes = serialize_points(pts, p, CurveKind::Hilbert);
        REQUIRE(codes.size() == 1);
        CHECK(codes[0] == hilbert_encode(quantize(pts[0], p), p.bits));
    }
    SECTION("points in the same cell collide") {
        const std::vector<Vec3> pts{{0.031, 0.032, 0.033}, {0.0305, 0.0325, 0.0335}};
        const auto codes = serialize_points(pts, p, CurveKind::Hilbert);
        CHECK(codes[0] == codes[1]);
    }
    SECTION("fixed-seed cloud matches per-point recomputation") {
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> coord(0.0, 2.0);
        std::vector<Vec3> pts(100);
        for (auto& q : pts) q = {coord(rng), coord(rng), coord(rng)};
        for (CurveKind kind : {CurveKind::Hilbert, CurveKind::Morton}) {
            const auto codes = serialize_points(pts, p, kind);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const GridCoord c = quantize(pts[i], p);
                const CurveCode expect = kind == CurveKind::Hilbert
                                             ? hilbert_encode(c, p.bits)
                                             : interleave_oracle(c, p.bits);
                REQUIRE(codes[i] == expect);
            }
        }
    }
    SECTION("reports the offending index") {
        CurveParams small;
        small.bits = 4;
        const std::vector<Vec3> pts{{0.01, 0.01, 0.01}, {5.0, 0.0, 0.0}};
        CHECK_THROWS_WITH(serialize_points(pts, small, CurveKind::Morton),
                          Catch::Matchers::ContainsSubstring("point 1"));
    }
}

TEST_CASE("exhaustive round trips for both curves at small depths", "[curves]") {
    for (CurveKind kind : {CurveKind::Hilbert, CurveKind::Morton}) {
        for (int bits : {1, 2, 3, 4}) {
            const std::uint32_t side = std::uint32_t(1) << bits;
            for (std::uint32_t x = 0; x < side; ++x)
                for (std::uint32_t y = 0; y < side; ++y)
                    for (std::uint32_t z = 0; z < side; ++z) {
                        const GridCoord c{x, y, z};
                        REQUIRE(decode_cell(encode_cell(c, bits, kind), bits, kind) == c);
                    }
        }
    }
}
