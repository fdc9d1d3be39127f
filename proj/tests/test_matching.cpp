#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "pointfuse/matching.hpp"
#include "pointfuse/rng.hpp"
#include "pointfuse/synthgen.hpp"

using namespace pointfuse;
using geom::Vec3;

namespace {

Vec3 random_unit(Rng& rng) {
    for (;;) {
        const Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double n = v.norm();
        if (n > 0.1 && n <= 1.0) return v / n;
    }
}

geom::AoiSet random_aois(Rng& rng, int k) {
    std::vector<geom::Aoi> aois;
    for (int i = 1; i <= k; ++i)
        aois.push_back(geom::build_aoi(i, {random_unit(rng) * rng.uniform(0.3, 1.5)}));
    return geom::AoiSet(std::move(aois));
}

// independent oracle: exhaustive minimum angle with the same tie rule
int brute_force_min_angle(const Vec3& pred, const geom::AoiSet& aois) {
    int best_id = -1;
    double best_angle = 1e9;
    for (const geom::Aoi& a : aois.all()) {
        const double ang = geom::angular_deviation_deg(pred, a.ground_truth);
        if (ang < best_angle || (ang == best_angle && a.id < best_id)) {
            best_angle = ang;
            best_id = a.id;
        }
    }
    return best_id;
}

} // namespace

TEST_CASE("exact ground truth wins with score 1") {
    Rng rng(5);
    const geom::AoiSet aois = random_aois(rng, 12);
    const MatchResult r = match_aoi(aois.by_id(7).ground_truth, aois);
    CHECK(r.aoi_id == 7);
    CHECK(r.score == doctest::Approx(1.0));
    CHECK(r.deviation_deg == doctest::Approx(0.0));
    CHECK(r.ranked.size() == 12);
    CHECK(r.ranked.front().first == 7);
}

TEST_CASE("symmetric tie breaks to the lower id") {
    std::vector<geom::Aoi> aois{geom::build_aoi(4, {{1, 1, 0}}), geom::build_aoi(2, {{1, -1, 0}})};
    const MatchResult r = match_aoi({1, 0, 0}, geom::AoiSet(aois));
    CHECK(r.aoi_id == 2);
    CHECK(r.ranked[0].second == doctest::Approx(r.ranked[1].second));
}

TEST_CASE("matches the brute-force minimum-angle oracle") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        const geom::AoiSet aois = random_aois(rng, 12);
        const Vec3 pred = random_unit(rng);
        CHECK(match_aoi(pred, aois).aoi_id == brute_force_min_angle(pred, aois));
    }
}

TEST_CASE("argmax cosine equals argmin deviation and scale invariance") {
    Rng rng(78);
    for (int trial = 0; trial < 300; ++trial) {
        const geom::AoiSet aois = random_aois(rng, 8);
        const Vec3 pred = random_unit(rng);
        const MatchResult r = match_aoi(pred, aois);

        // scale invariance for c > 0
        CHECK(match_aoi(pred * rng.uniform(0.01, 100.0), aois).aoi_id == r.aoi_id);

        // the ranked list is sorted by score and by deviation simultaneously
        for (std::size_t i = 1; i < r.ranked.size(); ++i)
            CHECK(r.ranked[i - 1].second >= r.ranked[i].second);
        CHECK(r.deviation_deg
              == doctest::Approx(std::acos(std::clamp(r.score, -1.0, 1.0)) * geom::kDegPerRad));
    }
}

TEST_CASE("result independent of AOI insertion order") {
    Rng rng(79);
    std::vector<geom::Aoi> aois;
    for (int i = 1; i <= 6; ++i)
        aois.push_back(geom::build_aoi(i, {random_unit(rng)}));
    const Vec3 pred = random_unit(rng);
    const int want = match_aoi(pred, geom::AoiSet(aois)).aoi_id;
    for (int shuffle = 0; shuffle < 10; ++shuffle) {
        rng.shuffle(aois);
        CHECK(match_aoi(pred, geom::AoiSet(aois)).aoi_id == want);
    }
}

TEST_CASE("matching against the default cockpit fixture") {
    const geom::AoiSet aois = synth::default_aoi_set();
    for (const geom::Aoi& a : aois.all())
        CHECK(match_aoi(a.ground_truth, aois).aoi_id == a.id);
}

TEST_CASE("error cases") {
    Rng rng(80);
    const geom::AoiSet aois = random_aois(rng, 3);
    CHECK_THROWS_AS(match_aoi({0, 0, 0}, aois), ZeroVectorError);
    CHECK_THROWS_AS(match_aoi({1, 0, 0}, geom::AoiSet()), DataError);
}
