#include "pointfuse/geometry.hpp"

#include <algorithm>
#include <string>

namespace pointfuse::geom {

Vec3 normalize(const Vec3& v) {
    const double n = v.norm();
    if (n <= kZeroNormEps) throw ZeroVectorError("normalize");
    return v / n;
}

double cosine_similarity(const Vec3& a, const Vec3& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na <= kZeroNormEps || nb <= kZeroNormEps) throw ZeroVectorError("cosine_similarity");
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double angular_deviation_deg(const Vec3& a, const Vec3& b) {
    return std::acos(cosine_similarity(a, b)) * kDegPerRad;
}

AngularError to_azimuth_elevation(const Vec3& d) {
    const double z = std::clamp(d.z, -1.0, 1.0);
    AngularError out;
    out.elevation = std::asin(z) * kDegPerRad;
    if (1.0 - std::abs(z) < 1e-12) {
        out.azimuth = 0.0; // gimbal convention
    } else {
        out.azimuth = std::atan2(d.y, d.x) * kDegPerRad;
    }
    return out;
}

Vec3 from_azimuth_elevation(double azimuth_deg, double elevation_deg) {
    const double az = azimuth_deg * kRadPerDeg;
    const double el = elevation_deg * kRadPerDeg;
    const double c = std::cos(el);
    return {c * std::cos(az), c * std::sin(az), std::sin(el)};
}

Aoi build_aoi(int id, std::vector<Vec3> corner_points) {
    if (corner_points.empty()) throw DomainError("build_aoi: no corner points");
    Vec3 mean;
    for (const Vec3& c : corner_points) mean += c;
    mean = mean / static_cast<double>(corner_points.size());

    Aoi aoi;
    aoi.id = id;
    aoi.corner_points = std::move(corner_points);
    aoi.mean_point = mean;
    aoi.ground_truth = normalize(mean); // throws ZeroVectorError if mean is at origin
    return aoi;
}

AoiSet::AoiSet(std::vector<Aoi> aois) : aois_(std::move(aois)) {
    std::sort(aois_.begin(), aois_.end(), [](const Aoi& a, const Aoi& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < aois_.size(); ++i) {
        if (aois_[i].id == aois_[i - 1].id)
            throw DataError("duplicate AOI id " + std::to_string(aois_[i].id));
    }
}

const Aoi& AoiSet::by_id(int id) const {
    for (const Aoi& a : aois_)
        if (a.id == id) return a;
    throw DataError("unknown AOI id " + std::to_string(id));
}

bool AoiSet::contains(int id) const {
    for (const Aoi& a : aois_)
        if (a.id == id) return true;
    return false;
}

AoiSet AoiSet::subset(const std::vector<int>& ids) const {
    std::vector<Aoi> keep;
    for (const int id : ids) keep.push_back(by_id(id));
    return AoiSet(std::move(keep));
}

std::vector<int> AoiSet::ids() const {
    std::vector<int> out;
    out.reserve(aois_.size());
    for (const Aoi& a : aois_) out.push_back(a.id);
    return out;
}

} // namespace pointfuse::geom
