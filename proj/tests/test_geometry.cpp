#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "pointfuse/geometry.hpp"
#include "pointfuse/rng.hpp"

using namespace pointfuse;
using geom::Vec3;

namespace {

Vec3 random_unit(Rng& rng) {
    // rejection sample inside the ball, then normalize
    for (;;) {
        const Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double n = v.norm();
        if (n > 0.1 && n <= 1.0) return v / n;
    }
}

} // namespace

TEST_CASE("normalize") {
    const Vec3 a = geom::normalize({3, 0, 4});
    CHECK(a.x == doctest::Approx(0.6));
    CHECK(a.z == doctest::Approx(0.8));

    const Vec3 b = geom::normalize({0, 1, 0});
    CHECK(b.y == doctest::Approx(1.0));

    // 1/sqrt(3), computed independently
    const Vec3 c = geom::normalize({1, 1, 1});
    CHECK(c.x == doctest::Approx(0.5773502691896258).epsilon(1e-5));
    CHECK(c.y == doctest::Approx(c.x));
    CHECK(c.z == doctest::Approx(c.x));

    CHECK_THROWS_AS(geom::normalize({0, 0, 0}), ZeroVectorError);
    CHECK_THROWS_AS(geom::normalize({1e-13, 0, 0}), ZeroVectorError);
}

TEST_CASE("cosine similarity") {
    CHECK(geom::cosine_similarity({0, 0, 1}, {0, 0, 1}) == doctest::Approx(1.0));
    CHECK(geom::cosine_similarity({1, 0, 0}, {0, 1, 0}) == doctest::Approx(0.0));
    // cos 45 degrees, computed independently as 1/sqrt(2)
    CHECK(geom::cosine_similarity({1, 0, 0}, {1, 1, 0})
          == doctest::Approx(0.7071067811865476).epsilon(1e-5));
    CHECK_THROWS_AS(geom::cosine_similarity({0, 0, 0}, {1, 0, 0}), ZeroVectorError);

    SUBCASE("invariant to positive scaling, clamped to [-1,1]") {
        Rng rng(42);
        for (int i = 0; i < 200; ++i) {
            const Vec3 a = random_unit(rng), b = random_unit(rng);
            const double c1 = geom::cosine_similarity(a, b);
            const double c2 = geom::cosine_similarity(a * rng.uniform(0.01, 50.0),
                                                      b * rng.uniform(0.01, 50.0));
            CHECK(c1 == doctest::Approx(c2).epsilon(1e-9));
            CHECK(c1 <= 1.0);
            CHECK(c1 >= -1.0);
        }
        CHECK(geom::cosine_similarity({1, 1, 1}, {2, 2, 2}) == 1.0); // exact after clamp
    }
}

TEST_CASE("angular deviation") {
    CHECK(geom::angular_deviation_deg({2, 1, 0}, {2, 1, 0}) == doctest::Approx(0.0));
    CHECK(geom::angular_deviation_deg({1, 0, 0}, {0, 1, 0}) == doctest::Approx(90.0));
    // arccos(1/sqrt 2) = 45 degrees
    CHECK(geom::angular_deviation_deg({1, 0, 0}, {1, 0, 1})
          == doctest::Approx(45.0).epsilon(1e-9));

    SUBCASE("symmetry, nonnegativity, spherical triangle inequality") {
        Rng rng(41);
        for (int i = 0; i < 300; ++i) {
            const Vec3 a = random_unit(rng), b = random_unit(rng), c = random_unit(rng);
            const double ab = geom::angular_deviation_deg(a, b);
            const double ba = geom::angular_deviation_deg(b, a);
            CHECK(ab == doctest::Approx(ba));
            CHECK(ab >= 0.0);
            CHECK(ab <= geom::angular_deviation_deg(a, c) + geom::angular_deviation_deg(c, b)
                            + 1e-9);
        }
    }
}

TEST_CASE("azimuth/elevation conversions") {
    const geom::AngularError fwd = geom::to_azimuth_elevation({1, 0, 0});
    CHECK(fwd.azimuth == doctest::Approx(0.0));
    CHECK(fwd.elevation == doctest::Approx(0.0));

    const geom::AngularError up = geom::to_azimuth_elevation({0, 0, 1});
    CHECK(up.azimuth == doctest::Approx(0.0)); // gimbal convention
    CHECK(up.elevation == doctest::Approx(90.0));

    const geom::AngularError diag = geom::to_azimuth_elevation({0.70710678, 0.70710678, 0});
    CHECK(diag.azimuth == doctest::Approx(45.0).epsilon(1e-6));
    CHECK(diag.elevation == doctest::Approx(0.0).epsilon(1e-6));

    const Vec3 f0 = geom::from_azimuth_elevation(0, 0);
    CHECK(f0.x == doctest::Approx(1.0));
    const Vec3 f90 = geom::from_azimuth_elevation(90, 0);
    CHECK(f90.y == doctest::Approx(1.0));

    SUBCASE("round trip on the open elevation interval") {
        const geom::AngularError back =
            geom::to_azimuth_elevation(geom::from_azimuth_elevation(30, 20));
        CHECK(back.azimuth == doctest::Approx(30.0).epsilon(1e-9));
        CHECK(back.elevation == doctest::Approx(20.0).epsilon(1e-9));

        Rng rng(40);
        for (int i = 0; i < 300; ++i) {
            const double az = rng.uniform(-179.9, 179.9);
            const double el = rng.uniform(-89.0, 89.0);
            const Vec3 v = geom::from_azimuth_elevation(az, el);
            CHECK(std::abs(v.norm() - 1.0) < 1e-12);
            const geom::AngularError got = geom::to_azimuth_elevation(v);
            CHECK(got.azimuth == doctest::Approx(az).epsilon(1e-9));
            CHECK(got.elevation == doctest::Approx(el).epsilon(1e-9));
        }
    }
}

TEST_CASE("translate origin") {
    const Vec3 a = geom::translate_origin({1, 2, 3}, {0, 0, 0});
    CHECK(a.x == 1.0);
    CHECK(a.z == 3.0);
    const Vec3 b = geom::translate_origin({1, 2, 3}, {1, 2, 3});
    CHECK(b.norm() == doctest::Approx(0.0));
    const Vec3 c = geom::translate_origin({2.0, -0.4, 1.1}, {1.2, -0.4, 0.3});
    CHECK(c.x == doctest::Approx(0.8));
    CHECK(c.y == doctest::Approx(0.0));
    CHECK(c.z == doctest::Approx(0.8));
}

TEST_CASE("build_aoi") {
    const geom::Aoi single = geom::build_aoi(1, {{1, 0, 0}});
    CHECK(single.ground_truth.x == doctest::Approx(1.0));

    const geom::Aoi sym = geom::build_aoi(2, {{1, 1, 0}, {1, -1, 0}});
    CHECK(sym.mean_point.x == doctest::Approx(1.0));
    CHECK(sym.mean_point.y == doctest::Approx(0.0));
    CHECK(sym.ground_truth.x == doctest::Approx(1.0));

    // mean (2/3, 2/3, 2/3), normalized to 1/sqrt(3) per component
    const geom::Aoi tri = geom::build_aoi(3, {{2, 0, 0}, {0, 2, 0}, {0, 0, 2}});
    CHECK(tri.mean_point.x == doctest::Approx(2.0 / 3.0));
    CHECK(tri.ground_truth.x == doctest::Approx(0.57735).epsilon(1e-5));

    CHECK_THROWS_AS(geom::build_aoi(4, {{1, 0, 0}, {-1, 0, 0}}), ZeroVectorError);
    CHECK_THROWS_AS(geom::build_aoi(5, {}), DomainError);

    SUBCASE("ground truth invariant under uniform positive scaling") {
        Rng rng(39);
        for (int i = 0; i < 100; ++i) {
            std::vector<Vec3> corners;
            for (int c = 0; c < 4; ++c)
                corners.push_back(random_unit(rng) * rng.uniform(0.2, 2.0)
                                  + Vec3{3, 0, 0});
            const double scale = rng.uniform(0.1, 10.0);
            std::vector<Vec3> scaled;
            for (const Vec3& c : corners) scaled.push_back(c * scale);
            const Vec3 g1 = geom::build_aoi(1, corners).ground_truth;
            const Vec3 g2 = geom::build_aoi(1, scaled).ground_truth;
            CHECK(geom::angular_deviation_deg(g1, g2) < 1e-9);
        }
    }
}

TEST_CASE("aoi set") {
    std::vector<geom::Aoi> aois{geom::build_aoi(2, {{0, 1, 0}}), geom::build_aoi(1, {{1, 0, 0}})};
    const geom::AoiSet set(aois);
    CHECK(set.size() == 2);
    CHECK(set.all().front().id == 1); // sorted by id
    CHECK(set.by_id(2).ground_truth.y == doctest::Approx(1.0));
    CHECK(set.contains(1));
    CHECK(!set.contains(3));
    CHECK_THROWS_AS(set.by_id(9), DataError);

    const geom::AoiSet sub = set.subset({2});
    CHECK(sub.size() == 1);

    std::vector<geom::Aoi> dup{geom::build_aoi(1, {{1, 0, 0}}), geom::build_aoi(1, {{0, 1, 0}})};
    CHECK_THROWS_AS(geom::AoiSet{dup}, DataError);
}
