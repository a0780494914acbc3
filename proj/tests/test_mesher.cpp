#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <utility>

#include "sfr/field.hpp"
#include "sfr/mesher.hpp"

using namespace sfr;

namespace {

auto unit_sphere_field() {
    return make_analytic_field([](const Vec3& q) { return q.norm() - 1.0; });
}

ExtractionConfig sphere_config(double cell) {
    ExtractionConfig cfg;
    cfg.bounds = {{-1.3, -1.3, -1.3}, {1.3, 1.3, 1.3}};
    cfg.cell = cell;
    return cfg;
}

double max_radial_error(const Mesh& mesh) {
    double worst = 0.0;
    for (const Vec3& v : mesh.vertices)
        worst = std::max(worst, std::abs(v.norm() - 1.0));
    return worst;
}

}  // namespace

TEST_CASE("extract_mesh on the analytic unit sphere", "[mesher]") {
    const auto field = unit_sphere_field();
    const Mesh mesh = extract_mesh(field, sphere_config(0.05));
    REQUIRE(!mesh.empty());

    SECTION("mesh invariants") {
        for (const auto& t : mesh.triangles) {
            REQUIRE(t[0] >= 0);
            REQUIRE(std::size_t(t[0]) < mesh.vertices.size());
            REQUIRE(std::size_t(t[1]) < mesh.vertices.size());
            REQUIRE(std::size_t(t[2]) < mesh.vertices.size());
            REQUIRE(t[0] != t[1]);
            REQUIRE(t[1] != t[2]);
            REQUIRE(t[0] != t[2]);
        }
        for (const Vec3& v : mesh.vertices) REQUIRE(v.finite());
    }
    SECTION("vertices hug the sphere within one cell") {
        CHECK(max_radial_error(mesh) < 0.05);
    }
    SECTION("vertices sit in sign-changing cells") {
        const double cell = 0.05;
        const Vec3 origin{-1.3, -1.3, -1.3};
        for (const Vec3& v : mesh.vertices) {
            const long i = long(std::floor((v.x - origin.x) / cell));
            const long j = long(std::floor((v.y - origin.y) / cell));
            const long k = long(std::floor((v.z - origin.z) / cell));
            bool neg = false, pos = false;
            for (int c = 0; c < 8; ++c) {
                const Vec3 corner = origin + Vec3{double(i + (c & 1)),
                                                  double(j + ((c >> 1) & 1)),
                                                  double(k + ((c >> 2) & 1))} * cell;
                ((corner.norm() - 1.0 < 0.0) ? neg : pos) = true;
            }
            REQUIRE(neg);
            REQUIRE(pos);
        }
    }
    SECTION("orientation: normals point outward (toward positive sdf)") {
        std::size_t good = 0;
        for (const auto& t : mesh.triangles) {
            const Vec3& a = mesh.vertices[std::size_t(t[0])];
            const Vec3& b = mesh.vertices[std::size_t(t[1])];
            const Vec3& c = mesh.vertices[std::size_t(t[2])];
            const Vec3 n = (b - a).cross(c - a);
            const Vec3 centroid = (a + b + c) / 3.0;
            if (n.dot(centroid) > 0.0) ++good;
        }
        CHECK(double(good) / double(mesh.triangles.size()) >= 0.999);
    }
    SECTION("watertight: every edge is shared by exactly two triangles") {
        std::map<std::pair<std::int32_t, std::int32_t>, int> edges;
        for (const auto& t : mesh.triangles)
            for (int e = 0; e < 3; ++e) {
                const std::int32_t a = t[std::size_t(e)];
                const std::int32_t b = t[std::size_t((e + 1) % 3)];
                edges[{std::min(a, b), std::max(a, b)}] += 1;
            }
        for (const auto& [edge, count] : edges) REQUIRE(count == 2);
    }
    SECTION("resolution refinement shrinks the error monotonically") {
        const double e1 = max_radial_error(extract_mesh(field, sphere_config(0.1)));
        const double e2 = max_radial_error(extract_mesh(field, sphere_config(0.05)));
        const double e3 = max_radial_error(extract_mesh(field, sphere_config(0.025)));
        INFO(e1 << " -> " << e2 << " -> " << e3);
        CHECK(e1 > e2);
        CHECK(e2 > e3);
    }
}

TEST_CASE("extract_mesh degenerate fields", "[mesher]") {
    SECTION("constant positive field gives an empty mesh") {
        const auto field = make_analytic_field([](const Vec3&) { return 1.0; });
        const Mesh mesh = extract_mesh(field, sphere_config(0.1));
        CHECK(mesh.empty());
        CHECK(mesh.vertices.empty());
    }
    SECTION("mask gate far everywhere suppresses all geometry") {
        struct GatedSphere {
            std::optional<FieldSample> operator()(const Vec3& q) const {
                return FieldSample{q.norm() - 1.0, -10.0};  // sigmoid ~ 0: far
            }
        };
        ExtractionConfig cfg = sphere_config(0.1);
        cfg.mask_gate = true;
        const Mesh mesh = extract_mesh(GatedSphere{}, cfg);
        CHECK(mesh.empty());
    }
    SECTION("near-surface mask keeps the geometry when gated") {
        struct BandedSphere {
            std::optional<FieldSample> operator()(const Vec3& q) const {
                const double d = q.norm() - 1.0;
                return FieldSample{d, std::abs(d) < 0.1 ? 10.0 : -10.0};
            }
        };
        ExtractionConfig cfg = sphere_config(0.05);
        cfg.mask_gate = true;
        const Mesh mesh = extract_mesh(BandedSphere{}, cfg);
        CHECK(!mesh.empty());
    }
    SECTION("no-support corners emit nothing") {
        struct HalfField {
            std::optional<FieldSample> operator()(const Vec3& q) const {
                if (q.x > 0.0) return std::nullopt;
                return FieldSample{q.norm() - 1.0, std::nullopt};
            }
        };
        const Mesh mesh = extract_mesh(HalfField{}, sphere_config(0.05));
        REQUIRE(!mesh.empty());
        for (const Vec3& v : mesh.vertices) REQUIRE(v.x <= 0.0 + 0.05);
    }
    SECTION("cell filter restricts the emitted region") {
        ExtractionConfig cfg = sphere_config(0.05);
        cfg.cell_filter = [](const Vec3& c) { return c.z > 0.0; };
        const Mesh mesh = extract_mesh(unit_sphere_field(), cfg);
        REQUIRE(!mesh.empty());
        for (const Vec3& v : mesh.vertices) REQUIRE(v.z > -0.05);
    }
}

TEST_CASE("sample_surface", "[mesher]") {
    SECTION("single triangle: samples stay in its plane") {
        Mesh tri;
        tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        tri.triangles = {{0, 1, 2}};
        const auto pts = sample_surface(tri, 500, 7);
        REQUIRE(pts.size() == 500);
        for (const Vec3& p : pts) {
            REQUIRE(p.z == 0.0);
            REQUIRE(p.x >= -1e-12);
            REQUIRE(p.y >= -1e-12);
            REQUIRE(p.x + p.y <= 1.0 + 1e-12);
        }
    }
    SECTION("area weighting passes a chi-square test at 9:1") {
        Mesh two;
        two.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 3, 0},  // area 4.5
                        {10, 0, 0}, {11, 0, 0}, {10, 1, 0}};  // area 0.5
        two.triangles = {{0, 1, 2}, {3, 4, 5}};
        const std::size_t n = 10000;
        const auto pts = sample_surface(two, n, 11);
        std::size_t big = 0;
        for (const Vec3& p : pts)
            if (p.x < 5.0) ++big;
        const double expect_big = 0.9 * double(n);
        const double expect_small = 0.1 * double(n);
        const double chi2 =
            (double(big) - expect_big) * (double(big) - expect_big) / expect_big +
            (double(n - big) - expect_small) * (double(n - big) - expect_small) /
                expect_small;
        INFO("chi2 = " << chi2);
        CHECK(chi2 < 6.635);  // p > 0.01 with one degree of freedom
    }
    SECTION("n = 0 yields an empty list") {
        Mesh tri;
        tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        tri.triangles = {{0, 1, 2}};
        CHECK(sample_surface(tri, 0, 1).empty());
        CHECK(sample_surface(Mesh{}, 0, 1).empty());
    }
    SECTION("empty mesh with n > 0 is an error") {
        CHECK_THROWS_AS(sample_surface(Mesh{}, 10, 1), EmptyMeshError);
    }
    SECTION("fixed seed is deterministic") {
        Mesh tri;
        tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        tri.triangles = {{0, 1, 2}};
        CHECK(sample_surface(tri, 100, 42) == sample_surface(tri, 100, 42));
    }
}
