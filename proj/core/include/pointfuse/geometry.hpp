#pragma once

#include <cmath>
#include <vector>

#include "pointfuse/errors.hpp"

namespace pointfuse::geom {

// Vehicle frame: x forward, y left, z up (ISO axes). Positions in meters,
// directions dimensionless. Angles are degrees at every API boundary.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double squared_norm() const { return dot(*this); }
    double norm() const { return std::sqrt(squared_norm()); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct EulerAngles {
    double yaw = 0.0;   // degrees, about z
    double pitch = 0.0; // degrees, about y
    double roll = 0.0;  // degrees, about x
};

struct AngularError {
    double azimuth = 0.0;   // degrees
    double elevation = 0.0; // degrees
};

inline constexpr double kRadPerDeg = 0.017453292519943295;
inline constexpr double kDegPerRad = 57.29577951308232;
inline constexpr double kZeroNormEps = 1e-12;

Vec3 normalize(const Vec3& v);

// (a.b)/(|a||b|), clamped to [-1,1] against rounding
double cosine_similarity(const Vec3& a, const Vec3& b);

// arccos of the cosine similarity, in degrees, range [0, 180]
double angular_deviation_deg(const Vec3& a, const Vec3& b);

// d must be unit norm. azimuth = atan2(y, x), elevation = asin(z).
// At elevation +-90 the azimuth is 0 by convention.
AngularError to_azimuth_elevation(const Vec3& d);

// el in [-90, 90]; inverse of to_azimuth_elevation on the open interval
Vec3 from_azimuth_elevation(double azimuth_deg, double elevation_deg);

// positions only; directions are unaffected by translation
inline Vec3 translate_origin(const Vec3& p, const Vec3& seat_origin) { return p - seat_origin; }

// An in-vehicle selectable target, reduced to a unit direction from the
// seat origin.
struct Aoi {
    int id = 0;
    std::vector<Vec3> corner_points;
    Vec3 mean_point;
    Vec3 ground_truth; // unit norm
};

Aoi build_aoi(int id, std::vector<Vec3> corner_points);

class AoiSet {
public:
    AoiSet() = default;
    explicit AoiSet(std::vector<Aoi> aois); // validates unique ids, sorts by id

    const std::vector<Aoi>& all() const { return aois_; }
    const Aoi& by_id(int id) const;
    bool contains(int id) const;
    std::size_t size() const { return aois_.size(); }
    bool empty() const { return aois_.empty(); }

    // subset restricted to the given ids (for class-removal ablations)
    AoiSet subset(const std::vector<int>& ids) const;
    std::vector<int> ids() const;

private:
    std::vector<Aoi> aois_;
};

} // namespace pointfuse::geom
