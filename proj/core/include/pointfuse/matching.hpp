#pragma once

#include <utility>
#include <vector>

#include "pointfuse/geometry.hpp"

namespace pointfuse {

struct MatchResult {
    int aoi_id = 0;
    double score = 0.0;         // cosine similarity of the winner
    double deviation_deg = 0.0; // arccos(score) in degrees
    std::vector<std::pair<int, double>> ranked; // all (aoi_id, score), best first
};

// The AOI whose ground-truth vector has the highest cosine similarity with
// the prediction (equivalently the lowest angular deviation). Ties break to
// the lowest id.
MatchResult match_aoi(const geom::Vec3& pred, const geom::AoiSet& aois);

} // namespace pointfuse
