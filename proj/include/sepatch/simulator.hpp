#pragma once

// Deterministic synthetic multi-camera driving scenes.
//
// World frame = ego frame at frame 0 (x forward, y left, z up). Objects are
// axis-aligned boxes integrated per frame:
//
//   pos_{k+1} = pos_k + vel_k,   vel_{k+1} = vel_k + accel * phase_scale(k)
//
// where phase_scale(k) is the scale of the last phase starting at or before
// frame k (1 when no phase applies). The ego advances `ego_velocity` metres
// along its heading and then turns by `ego_yaw_rate` radians each frame.
//
// Cameras: view v has yaw 2*pi*v/num_views (view 0 looks forward), sits at
// `camera_height` above the ground plane and is an ideal pinhole with focal
// length f = (width/2) / tan(fov/2) pixels and principal point (width/2,
// height/2). A point with camera-forward distance d > 0.1 m, lateral offset
// l (left positive) and height z projects to
//
//   u = width/2 - f * l / d,   v = height/2 - f * (z - camera_height) / d.
//
// Each visible object is drawn as a textured rectangle of size
// (f * width_m / d) x (f * height_m / d) centred on its projection, far to
// near. Background is 0.5 plus uniform noise of amplitude 0.03 hashed from
// (seed, frame, view, pixel), so render(script, frame) is a pure function.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sepatch/geometry.hpp"
#include "sepatch/image.hpp"
#include "sepatch/text.hpp"

namespace sepatch {

struct ObjectSpec {
    Vec3 position;  // world frame at frame 0; z is the box centre height
    Vec3 velocity;  // metres / frame
    Vec3 acceleration;
    double width = 2.0;
    double height = 1.6;
    int texture = 0;
    int appear_frame = 0;
};

struct Phase {
    int start_frame = 0;
    double accel_scale = 1.0;
};

struct ScenarioScript {
    std::string name = "custom";
    int num_views = 6;
    int height = 320;
    int width = 800;
    int channels = 1;
    double fov_deg = 70.0;
    double camera_height = 1.6;
    double ego_velocity = 0.0;
    double ego_yaw_rate = 0.0;
    int num_frames = 20;
    std::uint64_t seed = 0;
    double depth_max = 61.2;
    std::vector<ObjectSpec> objects;
    std::vector<Phase> phases;

    double focal() const { return 0.5 * width / std::tan(0.5 * fov_deg * M_PI / 180.0); }

    void validate() const {
        detail::check(num_views >= 1, "scenario '", name, "': views must be >= 1");
        detail::check(height >= 1 && width >= 1 && channels >= 1, "scenario '", name, "': bad image shape");
        detail::check(fov_deg > 0.0 && fov_deg < 180.0, "scenario '", name, "': fov_deg must lie in (0, 180)");
        detail::check(num_frames >= 1, "scenario '", name, "': frames must be >= 1");
        detail::check(depth_max > 0.0, "scenario '", name, "': depth_max must be positive");
        for (std::size_t i = 0; i < objects.size(); ++i) {
            const double d = horizontal_norm(objects[i].position);
            detail::check(d <= depth_max, "scenario '", name, "': object ", i, " starts at ", d,
                          " m, beyond depth_max ", depth_max);
            detail::check(objects[i].width > 0 && objects[i].height > 0, "scenario '", name, "': object ", i,
                          " has non-positive size");
            detail::check(objects[i].appear_frame >= 0, "scenario '", name, "': negative appear_frame");
        }
    }
};

struct FrameTruth {
    std::vector<Image> images;
    std::vector<int> object_ids;
    std::vector<Vec3> object_positions;  // current ego frame
    std::vector<double> object_depths;
    RigidTransform ego_motion;  // from the previous frame; identity at frame 0
};

namespace detail {

inline double phase_scale(const ScenarioScript& s, int frame) {
    double scale = 1.0;
    int best = -1;
    for (const auto& p : s.phases)
        if (p.start_frame <= frame && p.start_frame >= best) {
            best = p.start_frame;
            scale = p.accel_scale;
        }
    return scale;
}

struct EgoPose {
    Vec3 position;
    double yaw = 0.0;
};

inline EgoPose ego_pose(const ScenarioScript& s, int frame) {
    EgoPose p;
    for (int k = 0; k < frame; ++k) {
        p.position = p.position + Vec3{s.ego_velocity * std::cos(p.yaw), s.ego_velocity * std::sin(p.yaw), 0.0};
        p.yaw += s.ego_yaw_rate;
    }
    return p;
}

inline Vec3 object_world(const ScenarioScript& s, const ObjectSpec& o, int frame) {
    Vec3 pos = o.position, vel = o.velocity;
    for (int k = 0; k < frame; ++k) {
        pos = pos + vel;
        vel = vel + phase_scale(s, k) * o.acceleration;
    }
    return pos;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline double hash_unit(std::uint64_t seed, std::uint64_t frame, std::uint64_t view, std::uint64_t pixel) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ frame);
    h = splitmix64(h ^ (view << 32));
    h = splitmix64(h ^ pixel);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double texture_value(int texture, double a, double b) {
    switch (((texture % 3) + 3) % 3) {
        case 0: {  // checkerboard, 6 x 6 cells
            const int i = static_cast<int>(a * 6.0), j = static_cast<int>(b * 6.0);
            return ((i + j) % 2) ? 0.85 : 0.15;
        }
        case 1:  // vertical stripes
            return (static_cast<int>(b * 8.0) % 2) ? 0.9 : 0.1;
        default: {  // rings
            const double r = std::hypot(a - 0.5, b - 0.5);
            return (static_cast<int>(r * 12.0) % 2) ? 0.8 : 0.2;
        }
    }
}

}  // namespace detail

/// Pixel rectangle [top, bottom) x [left, right) in continuous coordinates.
struct ProjectedBox {
    double top = 0, bottom = 0, left = 0, right = 0;
    double forward = 0;
};

/// Projection of a box at ego-frame `position` into view `view`, or nothing if
/// it is behind the camera.
inline std::optional<ProjectedBox> project_box(const ScenarioScript& s, int view, Vec3 position, double width_m,
                                               double height_m) {
    const double yaw = 2.0 * M_PI * view / s.num_views;
    const double fwd = std::cos(yaw) * position.x + std::sin(yaw) * position.y;
    if (fwd <= 0.1) return std::nullopt;
    const double left = -std::sin(yaw) * position.x + std::cos(yaw) * position.y;
    const double f = s.focal();
    const double u = 0.5 * s.width - f * left / fwd;
    const double v = 0.5 * s.height - f * (position.z - s.camera_height) / fwd;
    const double hw = 0.5 * f * width_m / fwd, hh = 0.5 * f * height_m / fwd;
    return ProjectedBox{v - hh, v + hh, u - hw, u + hw, fwd};
}

/// Ground truth without rendering images.
inline FrameTruth frame_truth(const ScenarioScript& s, int frame) {
    detail::check(frame >= 0 && frame < s.num_frames, "render: frame ", frame, " outside [0, ", s.num_frames, ")");
    FrameTruth t;
    const auto pose = detail::ego_pose(s, frame);
    const double c = std::cos(pose.yaw), sn = std::sin(pose.yaw);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
        const auto& o = s.objects[i];
        if (frame < o.appear_frame) continue;
        const Vec3 d = detail::object_world(s, o, frame) - pose.position;
        const Vec3 ego{c * d.x + sn * d.y, -sn * d.x + c * d.y, d.z};
        t.object_ids.push_back(static_cast<int>(i));
        t.object_positions.push_back(ego);
        t.object_depths.push_back(horizontal_norm(ego));
    }
    t.ego_motion = frame == 0 ? RigidTransform::identity()
                              : RigidTransform::from_yaw(s.ego_yaw_rate, {s.ego_velocity, 0.0, 0.0});
    return t;
}

inline Image render_view(const ScenarioScript& s, const FrameTruth& t, int frame, int view) {
    Image img(s.height, s.width, s.channels);
    for (int r = 0; r < s.height; ++r)
        for (int c = 0; c < s.width; ++c) {
            const auto px = static_cast<std::uint64_t>(r) * static_cast<std::uint64_t>(s.width) + static_cast<std::uint64_t>(c);
            const double n = detail::hash_unit(s.seed, static_cast<std::uint64_t>(frame), static_cast<std::uint64_t>(view), px);
            const double v = 0.5 + 0.03 * (2.0 * n - 1.0);
            for (int ch = 0; ch < s.channels; ++ch) img.at(r, c, ch) = v;
        }

    struct Item {
        ProjectedBox box;
        int texture;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < t.object_ids.size(); ++i) {
        const auto& o = s.objects[static_cast<std::size_t>(t.object_ids[i])];
        if (auto b = project_box(s, view, t.object_positions[i], o.width, o.height)) items.push_back({*b, o.texture});
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const Item& a, const Item& b) { return a.box.forward > b.box.forward; });
    for (const auto& it : items) {
        const auto& b = it.box;
        const int r0 = std::max(0, static_cast<int>(std::ceil(b.top - 0.5)));
        const int r1 = std::min(s.height, static_cast<int>(std::ceil(b.bottom - 0.5)));
        const int c0 = std::max(0, static_cast<int>(std::ceil(b.left - 0.5)));
        const int c1 = std::min(s.width, static_cast<int>(std::ceil(b.right - 0.5)));
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) {
                const double a = (r + 0.5 - b.top) / (b.bottom - b.top);
                const double bb = (c + 0.5 - b.left) / (b.right - b.left);
                const double v = detail::texture_value(it.texture, a, bb);
                for (int ch = 0; ch < s.channels; ++ch) img.at(r, c, ch) = v * (1.0 - 0.1 * ch);
            }
    }
    return img;
}

inline FrameTruth render(const ScenarioScript& s, int frame) {
    FrameTruth t = frame_truth(s, frame);
    for (int v = 0; v < s.num_views; ++v) t.images.push_back(render_view(s, t, frame, v));
    return t;
}

inline double mean_truth_depth(const FrameTruth& t) {
    double sum = 0.0;
    for (double d : t.object_depths) sum += d;
    return t.object_depths.empty() ? 0.0 : sum / static_cast<double>(t.object_depths.size());
}

// ---------------------------------------------------------------------------
// Scenario library

namespace detail {

/// Object at `range` metres and `bearing` degrees, moving radially.
inline ObjectSpec radial_object(double bearing_deg, double range, double speed, double accel, int texture,
                                int appear_frame = 0) {
    const double b = bearing_deg * M_PI / 180.0;
    const Vec3 dir{std::cos(b), std::sin(b), 0.0};
    ObjectSpec o;
    o.position = Vec3{range * dir.x, range * dir.y, 0.8};
    o.velocity = speed * dir;
    o.acceleration = accel * dir;
    o.texture = texture;
    o.appear_frame = appear_frame;
    return o;
}

inline ScenarioScript base_script(std::string name) {
    ScenarioScript s;
    s.name = std::move(name);
    s.seed = 7;
    return s;
}

}  // namespace detail

/// Named scenarios: receding, approaching, turn-in, static, mixed.
inline std::map<std::string, ScenarioScript> scripted_scenarios() {
    using detail::radial_object;
    std::map<std::string, ScenarioScript> lib;
    const double bearings[] = {0, 10, -12, 60, -60, 120, -120, 180};

    {  // every object moves away, accelerating
        auto s = detail::base_script("receding");
        for (int i = 0; i < 8; ++i) s.objects.push_back(radial_object(bearings[i], 34.0 + 1.5 * i, 0.2, 0.05, i));
        lib.emplace(s.name, s);
    }
    {  // every object closes in, accelerating
        auto s = detail::base_script("approaching");
        for (int i = 0; i < 8; ++i) s.objects.push_back(radial_object(bearings[i], 38.0 + 1.5 * i, -0.3, -0.05, i));
        lib.emplace(s.name, s);
    }
    {  // ego turns on the spot; distant traffic appears at frame 8
        auto s = detail::base_script("turn-in");
        s.ego_yaw_rate = 0.02;
        for (int i = 0; i < 3; ++i) s.objects.push_back(radial_object(bearings[i], 18.0 + 2.0 * i, 0.0, 0.0, i));
        for (int i = 3; i < 8; ++i) s.objects.push_back(radial_object(bearings[i], 52.0 + i, 0.0, 0.0, i, 8));
        lib.emplace(s.name, s);
    }
    {
        auto s = detail::base_script("static");
        for (int i = 0; i < 8; ++i) s.objects.push_back(radial_object(bearings[i], 12.0 + 5.0 * i, 0.0, 0.0, i));
        lib.emplace(s.name, s);
    }
    {  // recede, swing back in past the threshold, then recede again
        auto s = detail::base_script("mixed");
        s.num_frames = 36;
        for (int i = 0; i < 8; ++i) s.objects.push_back(radial_object(bearings[i], 36.0 + 1.5 * i, 0.3, 0.1, i));
        s.phases = {{6, -3.0}, {18, 4.0}};
        lib.emplace(s.name, s);
    }
    return lib;
}

// Script text format: "key = value" lines, '#' comments. Scalar keys:
// name, views, height, width, channels, fov_deg, camera_height, ego_velocity,
// ego_yaw_rate, frames, seed, depth_max. Repeatable keys:
//
//   object = x y z vx vy vz ax ay az width height texture appear_frame
//   phase  = start_frame accel_scale

inline void write_script(std::ostream& os, const ScenarioScript& s) {
    using text::format_double;
    os << "# sepatch scenario v1\n";
    os << "name = " << s.name << '\n'
       << "views = " << s.num_views << '\n'
       << "height = " << s.height << '\n'
       << "width = " << s.width << '\n'
       << "channels = " << s.channels << '\n'
       << "fov_deg = " << format_double(s.fov_deg) << '\n'
       << "camera_height = " << format_double(s.camera_height) << '\n'
       << "ego_velocity = " << format_double(s.ego_velocity) << '\n'
       << "ego_yaw_rate = " << format_double(s.ego_yaw_rate) << '\n'
       << "frames = " << s.num_frames << '\n'
       << "seed = " << s.seed << '\n'
       << "depth_max = " << format_double(s.depth_max) << '\n';
    for (const auto& o : s.objects) {
        os << "object =";
        for (double v : {o.position.x, o.position.y, o.position.z, o.velocity.x, o.velocity.y, o.velocity.z,
                         o.acceleration.x, o.acceleration.y, o.acceleration.z, o.width, o.height})
            os << ' ' << format_double(v);
        os << ' ' << o.texture << ' ' << o.appear_frame << '\n';
    }
    for (const auto& p : s.phases) os << "phase = " << p.start_frame << ' ' << format_double(p.accel_scale) << '\n';
}

inline ScenarioScript read_script(std::istream& is, std::string_view source = "scenario") {
    ScenarioScript s;
    auto words = [](std::string_view v) {
        std::vector<std::string_view> out;
        for (auto w : text::split(v, ' '))
            if (!text::trim(w).empty()) out.push_back(text::trim(w));
        return out;
    };
    for (const auto& kv : text::read_key_values(is, source)) {
        const auto& k = kv.key;
        const auto& v = kv.value;
        if (k == "name") s.name = v;
        else if (k == "views") s.num_views = text::parse_int<int>(v, k);
        else if (k == "height") s.height = text::parse_int<int>(v, k);
        else if (k == "width") s.width = text::parse_int<int>(v, k);
        else if (k == "channels") s.channels = text::parse_int<int>(v, k);
        else if (k == "fov_deg") s.fov_deg = text::parse_double(v, k);
        else if (k == "camera_height") s.camera_height = text::parse_double(v, k);
        else if (k == "ego_velocity") s.ego_velocity = text::parse_double(v, k);
        else if (k == "ego_yaw_rate") s.ego_yaw_rate = text::parse_double(v, k);
        else if (k == "frames") s.num_frames = text::parse_int<int>(v, k);
        else if (k == "seed") s.seed = text::parse_int<std::uint64_t>(v, k);
        else if (k == "depth_max") s.depth_max = text::parse_double(v, k);
        else if (k == "object") {
            const auto w = words(v);
            detail::check(w.size() == 13, source, ":", kv.line, ": object needs 13 fields, got ", w.size());
            double f[11];
            for (int i = 0; i < 11; ++i) f[i] = text::parse_double(w[static_cast<std::size_t>(i)], "object");
            ObjectSpec o;
            o.position = {f[0], f[1], f[2]};
            o.velocity = {f[3], f[4], f[5]};
            o.acceleration = {f[6], f[7], f[8]};
            o.width = f[9];
            o.height = f[10];
            o.texture = text::parse_int<int>(w[11], "object texture");
            o.appear_frame = text::parse_int<int>(w[12], "object appear_frame");
            s.objects.push_back(o);
        } else if (k == "phase") {
            const auto w = words(v);
            detail::check(w.size() == 2, source, ":", kv.line, ": phase needs 2 fields, got ", w.size());
            s.phases.push_back({text::parse_int<int>(w[0], "phase start"), text::parse_double(w[1], "phase scale")});
        } else {
            detail::fail(source, ":", kv.line, ": unknown key '", k, "'");
        }
    }
    s.validate();
    return s;
}

}  // namespace sepatch
