#include "pointfuse/matching.hpp"

#include <algorithm>
#include <cmath>

#include "pointfuse/errors.hpp"

namespace pointfuse {

MatchResult match_aoi(const geom::Vec3& pred, const geom::AoiSet& aois) {
    if (aois.empty()) throw DataError("empty AOI set");
    if (pred.norm() <= geom::kZeroNormEps) throw ZeroVectorError("match_aoi");

    MatchResult out;
    out.ranked.reserve(aois.size());
    for (const geom::Aoi& a : aois.all())
        out.ranked.emplace_back(a.id, geom::cosine_similarity(pred, a.ground_truth));

    // stable sort on a set already ordered by id: equal scores keep lowest id first
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    out.aoi_id = out.ranked.front().first;
    out.score = out.ranked.front().second;
    out.deviation_deg = std::acos(std::clamp(out.score, -1.0, 1.0)) * geom::kDegPerRad;
    return out;
}

} // namespace pointfuse
