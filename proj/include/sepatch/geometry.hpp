#pragma once

#include <array>
#include <cmath>

namespace sepatch {

/// Ego frame: x forward, y left, z up. Metres.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }

/// Distance in the ground plane.
inline double horizontal_norm(Vec3 p) { return std::hypot(p.x, p.y); }

/// Pose of the current ego frame expressed in the previous ego frame:
/// a point p_prev in the previous frame has current coordinates
/// R^T (p_prev - t).
struct RigidTransform {
    std::array<std::array<double, 3>, 3> rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    Vec3 translation{};

    static RigidTransform identity() { return {}; }

    /// Rotation about z by `yaw` radians followed by translation `t`.
    static RigidTransform from_yaw(double yaw, Vec3 t) {
        RigidTransform r;
        const double c = std::cos(yaw), s = std::sin(yaw);
        r.rotation = {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
        r.translation = t;
        return r;
    }

    /// Maps a point from the previous ego frame into the current one.
    Vec3 to_current(Vec3 p) const {
        const Vec3 d = p - translation;
        const auto& m = rotation;
        return {m[0][0] * d.x + m[1][0] * d.y + m[2][0] * d.z, m[0][1] * d.x + m[1][1] * d.y + m[2][1] * d.z,
                m[0][2] * d.x + m[1][2] * d.y + m[2][2] * d.z};
    }

    /// Maps a point from the current ego frame into the previous one.
    Vec3 to_previous(Vec3 p) const {
        const auto& m = rotation;
        return Vec3{m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z, m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
                    m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z} +
               translation;
    }
};

}  // namespace sepatch
