#pragma once

// Deterministic 2-D following world: differential-drive robot, scripted
// pedestrian paths, and a pinhole RGB-D renderer that draws every agent as an
// upright billboard at constant camera depth. Small enough to verify against
// brute-force oracles, rich enough to reproduce the uniform-crowd experiments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ucf/common.hpp"
#include "ucf/geometry.hpp"
#include "ucf/image.hpp"

namespace ucf {

inline constexpr double kSimDt = 0.05;          // s, 20 Hz control rate
inline constexpr double kFacingCosine = 0.2588190451025207;  // cos 75 deg
inline constexpr double kHeadBandFraction = 0.2;             // of body height
inline constexpr double kMinVisibleFraction = 0.05;
inline constexpr double kNearPlane = 0.05;      // m
inline constexpr int kFollowedHaltSteps = 10;

struct Vec2 {
    double x = 0.0, y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct Color3 {
    double r = 0.0, g = 0.0, b = 0.0;
};

inline constexpr Color3 kBackgroundColor{0.8, 0.8, 0.8};
inline constexpr Color3 kUniformClothing{0.25, 0.35, 0.75};
inline constexpr Color3 kHairColor{0.15, 0.12, 0.10};

struct AgentPath {
    std::vector<Vec2> waypoints;
    double speed = 0.8;        // m/s
    double start_delay = 0.0;  // s of standing still before walking
    bool stop_when_followed = false;
};

inline void validate_path(const AgentPath& path) {
    if (path.waypoints.size() < 2) throw ContractError("agent path needs at least 2 waypoints");
    if (path.speed <= 0.0) throw ContractError("agent path speed must be positive");
}

inline double path_length(const AgentPath& path) {
    double total = 0.0;
    for (std::size_t i = 1; i < path.waypoints.size(); ++i)
        total += distance(path.waypoints[i - 1], path.waypoints[i]);
    return total;
}

// Point at arc length s along the polyline (clamped to the ends) and the unit
// direction of the segment it falls on.
inline std::pair<Vec2, Vec2> path_point(const AgentPath& path, double s) {
    Vec2 dir{1.0, 0.0};
    for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
        const Vec2& a = path.waypoints[i - 1];
        const Vec2& b = path.waypoints[i];
        const double seg = distance(a, b);
        if (seg <= 0.0) continue;
        dir = {(b.x - a.x) / seg, (b.y - a.y) / seg};
        if (s <= seg) return {{a.x + dir.x * s, a.y + dir.y * s}, dir};
        s -= seg;
    }
    return {path.waypoints.back(), dir};
}

struct SubjectPreset {
    double height = 1.70;  // m
    double width = 0.50;   // m
    double speed = 0.80;   // m/s
};

inline SubjectPreset subject_a() { return {1.70, 0.50, 0.80}; }
inline SubjectPreset subject_b() { return {1.55, 0.45, 0.70}; }

struct Agent {
    AgentPath path;
    double body_w = 0.5;
    double body_h = 1.7;
    Color3 clothing = kUniformClothing;
    Color3 face_tint{0.85, 0.65, 0.55};
    int latent_id = 0;  // row in the identity gallery
    bool is_target = false;

    // runtime state
    Vec2 pos;
    Vec2 facing{1.0, 0.0};
    double progress = 0.0;  // meters walked along the path
    bool halted = false;
    int followed_steps = 0;

    bool walking_done() const { return progress >= path_length(path); }
};

struct RobotState {
    double x = 0.0, y = 0.0, theta = 0.0;
    double v = 0.0, omega = 0.0;  // commanded velocities
};

struct WorldState {
    double time = 0.0;
    RobotState robot;
    std::vector<Agent> agents;
    bool uniform_crowd = true;

    std::size_t target_index() const {
        std::size_t idx = agents.size();
        for (std::size_t i = 0; i < agents.size(); ++i)
            if (agents[i].is_target) {
                if (idx != agents.size()) throw ContractError("multiple target agents");
                idx = i;
            }
        if (idx == agents.size()) throw ContractError("no target agent");
        return idx;
    }
};

struct CameraModel {
    double height = 1.0;                    // m above ground, at the robot pose
    double hfov = 1.5707963267948966;       // rad (90 deg)
    std::size_t image_h = 96, image_w = 96;

    double focal_px() const { return 0.5 * static_cast<double>(image_w) / std::tan(0.5 * hfov); }
};

inline void validate_camera(const CameraModel& cam) {
    if (!(cam.hfov > 0.0) || !(cam.hfov < 3.141592653589793))
        throw ContractError("camera hfov must lie in (0, pi)");
}

// --------------------------------------------------------------------------
// scenarios

enum class ScenarioKind { none, one_cross, two_cross, two_parallel };

inline ScenarioKind parse_scenario(const std::string& name) {
    if (name == "none") return ScenarioKind::none;
    if (name == "one_cross") return ScenarioKind::one_cross;
    if (name == "two_cross") return ScenarioKind::two_cross;
    if (name == "two_parallel") return ScenarioKind::two_parallel;
    throw ContractError("unknown scenario: " + name);
}

inline const char* scenario_name(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::none: return "none";
        case ScenarioKind::one_cross: return "one_cross";
        case ScenarioKind::two_cross: return "two_cross";
        case ScenarioKind::two_parallel: return "two_parallel";
    }
    throw ContractError("unknown scenario kind");
}

// A distractor that cuts across the target's path: it walks a straight
// segment of half-length `amplitude` through the point `arc` meters along the
// target path, perpendicular to it, timed to reach that point `lead` seconds
// after the target does.
struct CrossingSpec {
    double arc = 3.0;        // m along the target path
    double lead = 0.35;      // s after the target passes
    double amplitude = 2.0;  // m walked on each side of the crossing point
    double side = 1.0;       // +1 = approach from the target's left
};

struct ScenarioLayout {
    std::vector<AgentPath> paths;  // paths[0] is the target
    RobotState robot;              // start pose
};

inline constexpr double kTargetStartDelay = 1.0;     // s
inline constexpr double kDistractorSpeed = 0.8;      // m/s
inline constexpr double kParallelOffset = 0.8;       // m lateral
// 6 m x 4 m rectangle; the robot sits at the origin corner and the target
// starts 2 m ahead on its heading.
inline std::vector<Vec2> rectangle_waypoints() {
    return {{2.0, 0.0}, {8.0, 0.0}, {8.0, 4.0}, {2.0, 4.0}, {2.0, 0.0}};
}

inline AgentPath crossing_path(const AgentPath& target, const CrossingSpec& spec) {
    auto [point, dir] = path_point(target, spec.arc);
    const Vec2 normal{-dir.y, dir.x};  // target's left
    const Vec2 from{point.x + spec.side * spec.amplitude * normal.x,
                    point.y + spec.side * spec.amplitude * normal.y};
    const Vec2 to{point.x - spec.side * spec.amplitude * normal.x,
                  point.y - spec.side * spec.amplitude * normal.y};
    const double target_eta = target.start_delay + spec.arc / target.speed;
    AgentPath path;
    path.waypoints = {from, to};
    path.speed = kDistractorSpeed;
    path.start_delay = target_eta + spec.lead - spec.amplitude / kDistractorSpeed;
    path.stop_when_followed = true;
    if (path.start_delay < 0.0) path.start_delay = 0.0;
    return path;
}

inline std::vector<Vec2> offset_rectangle(double offset) {
    // positive offset moves toward the rectangle interior (the walker's left)
    return {{2.0 + offset, 0.0 + offset},
            {8.0 - offset, 0.0 + offset},
            {8.0 - offset, 4.0 - offset},
            {2.0 + offset, 4.0 - offset},
            {2.0 + offset, 0.0 + offset}};
}

inline std::vector<CrossingSpec> scenario_crossings(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::one_cross: return {{3.0, 0.5, 2.0, +1.0}};
        case ScenarioKind::two_cross: return {{3.0, 0.9, 2.5, +1.0}, {6.5, 0.9, 2.5, -1.0}};
        default: return {};
    }
}

inline ScenarioLayout scenario(ScenarioKind kind, double target_speed = 0.8) {
    ScenarioLayout layout;
    layout.robot = RobotState{0.0, 0.0, 0.0, 0.0, 0.0};

    AgentPath target;
    target.waypoints = rectangle_waypoints();
    target.speed = target_speed;
    target.start_delay = kTargetStartDelay;
    target.stop_when_followed = false;
    layout.paths.push_back(target);

    for (const CrossingSpec& spec : scenario_crossings(kind))
        layout.paths.push_back(crossing_path(target, spec));

    if (kind == ScenarioKind::two_parallel) {
        for (double offset : {kParallelOffset, -kParallelOffset}) {
            AgentPath p;
            p.waypoints = offset_rectangle(offset);
            p.speed = target_speed;  // walks abreast of the target
            p.start_delay = kTargetStartDelay;
            p.stop_when_followed = true;
            layout.paths.push_back(p);
        }
    }
    for (const AgentPath& p : layout.paths) validate_path(p);
    return layout;
}

inline WorldState make_world(ScenarioKind kind, SubjectPreset subject = subject_a(),
                             bool uniform_crowd = true) {
    const ScenarioLayout layout = scenario(kind, subject.speed);
    static constexpr Color3 kFaceTints[] = {
        {0.85, 0.65, 0.55}, {0.55, 0.85, 0.35}, {0.35, 0.55, 0.85}};
    static constexpr Color3 kCrowdClothing[] = {
        {0.25, 0.35, 0.75}, {0.75, 0.30, 0.25}, {0.30, 0.70, 0.35}};

    WorldState world;
    world.robot = layout.robot;
    world.uniform_crowd = uniform_crowd;
    for (std::size_t i = 0; i < layout.paths.size(); ++i) {
        Agent a;
        a.path = layout.paths[i];
        a.is_target = (i == 0);
        if (a.is_target) {
            a.body_h = subject.height;
            a.body_w = subject.width;
        }
        a.clothing = uniform_crowd ? kUniformClothing : kCrowdClothing[i % 3];
        a.face_tint = kFaceTints[i % 3];
        a.latent_id = static_cast<int>(i);
        a.pos = a.path.waypoints.front();
        // stand facing the robot until walking starts (faces are visible for
        // the identity handshake at trial start)
        const double dx = layout.robot.x - a.pos.x, dy = layout.robot.y - a.pos.y;
        const double n = std::hypot(dx, dy);
        a.facing = n > 0.0 ? Vec2{dx / n, dy / n} : Vec2{1.0, 0.0};
        world.agents.push_back(a);
    }
    return world;
}

// --------------------------------------------------------------------------
// world stepping

namespace detail {

// Perpendicular distance from an agent to the robot's heading ray; agents
// behind the robot do not count as followed.
inline double heading_ray_distance(const RobotState& robot, const Vec2& p) {
    const double fx = std::cos(robot.theta), fy = std::sin(robot.theta);
    const double dx = p.x - robot.x, dy = p.y - robot.y;
    const double along = dx * fx + dy * fy;
    if (along <= 0.0) return std::numeric_limits<double>::infinity();
    return std::abs(dx * fy - dy * fx);
}

}  // namespace detail

inline void step_world(WorldState& world, double dt = kSimDt) {
    if (dt <= 0.0) throw ContractError("step_world: dt must be positive");

    // "The distractor stops once the robot starts following him": halt a
    // distractor permanently after it (and not the target) has been the agent
    // nearest the heading ray for 10 consecutive steps.
    const std::size_t target = world.target_index();
    std::size_t nearest = world.agents.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < world.agents.size(); ++i) {
        const double d = detail::heading_ray_distance(world.robot, world.agents[i].pos);
        if (d < best || (d == best && i == target)) {
            best = d;
            nearest = i;
        }
    }
    for (std::size_t i = 0; i < world.agents.size(); ++i) {
        Agent& a = world.agents[i];
        if (!a.path.stop_when_followed || a.halted) continue;
        a.followed_steps = (i == nearest && i != target) ? a.followed_steps + 1 : 0;
        if (a.followed_steps >= kFollowedHaltSteps) a.halted = true;
    }

    for (Agent& a : world.agents) {
        if (a.halted || world.time < a.path.start_delay || a.walking_done()) continue;
        a.progress = std::min(a.progress + a.path.speed * dt, path_length(a.path));
        auto [pos, dir] = path_point(a.path, a.progress);
        a.pos = pos;
        a.facing = dir;
    }

    RobotState& r = world.robot;
    r.x += r.v * std::cos(r.theta) * dt;
    r.y += r.v * std::sin(r.theta) * dt;
    r.theta += r.omega * dt;
    world.time += dt;
}

// --------------------------------------------------------------------------
// rendering

namespace detail {

struct BillboardRect {
    double u1, u2;       // horizontal pixel extent
    double v1, v2;       // vertical pixel extent (v1 = head top)
    double head_v_end;   // rows above this line belong to the head band
    double z;            // camera-plane depth, m
};

inline std::optional<BillboardRect> project_agent(const RobotState& robot,
                                                  const CameraModel& cam, const Agent& a) {
    const double fx = std::cos(robot.theta), fy = std::sin(robot.theta);
    const double rx = std::sin(robot.theta), ry = -std::cos(robot.theta);  // image right
    const double dx = a.pos.x - robot.x, dy = a.pos.y - robot.y;
    const double z = dx * fx + dy * fy;
    if (z < kNearPlane) return std::nullopt;
    const double lateral = dx * rx + dy * ry;

    const double f = cam.focal_px();
    const double cu = 0.5 * static_cast<double>(cam.image_w);
    const double cv = 0.5 * static_cast<double>(cam.image_h);
    BillboardRect rect;
    rect.z = z;
    const double uc = cu + f * lateral / z;
    const double du = f * (0.5 * a.body_w) / z;
    rect.u1 = uc - du;
    rect.u2 = uc + du;
    rect.v1 = cv + f * (cam.height - a.body_h) / z;
    rect.v2 = cv + f * cam.height / z;
    rect.head_v_end = cv + f * (cam.height - (1.0 - kHeadBandFraction) * a.body_h) / z;
    return rect;
}

inline bool agent_faces_camera(const RobotState& robot, const Agent& a) {
    const double dx = robot.x - a.pos.x, dy = robot.y - a.pos.y;
    const double n = std::hypot(dx, dy);
    if (n <= 0.0) return true;
    return (a.facing.x * dx + a.facing.y * dy) / n >= kFacingCosine;
}

// first integer pixel whose center lies at or after coordinate c
inline long first_center(double c) { return static_cast<long>(std::ceil(c - 0.5)); }

}  // namespace detail

inline bool agent_faces_camera(const WorldState& world, std::size_t index) {
    if (index >= world.agents.size()) throw ContractError("agent index out of range");
    return detail::agent_faces_camera(world.robot, world.agents[index]);
}

inline RgbdFrame render_rgbd(const WorldState& world, const CameraModel& cam,
                             std::mt19937_64* noise_rng = nullptr,
                             double sigma_rgb = 0.01, double sigma_depth = 0.02) {
    validate_camera(cam);
    const std::size_t H = cam.image_h, W = cam.image_w;
    RgbdFrame frame(H, W);
    frame.timestamp = world.time;
    for (std::size_t i = 0; i < H * W; ++i) {
        frame.rgb[i] = kBackgroundColor.r;
        frame.rgb[H * W + i] = kBackgroundColor.g;
        frame.rgb[2 * H * W + i] = kBackgroundColor.b;
        frame.depth[i] = kDepthMax;
    }
    std::vector<double> zbuf(H * W, std::numeric_limits<double>::infinity());

    for (const Agent& a : world.agents) {
        const auto rect = detail::project_agent(world.robot, cam, a);
        if (!rect) continue;
        const bool facing = detail::agent_faces_camera(world.robot, a);
        const Color3 head = facing ? a.face_tint : kHairColor;
        const long px_lo = std::max(detail::first_center(rect->u1), 0L);
        const long px_hi = std::min(detail::first_center(rect->u2) - 1,
                                    static_cast<long>(W) - 1);
        const long py_lo = std::max(detail::first_center(rect->v1), 0L);
        const long py_hi = std::min(detail::first_center(rect->v2) - 1,
                                    static_cast<long>(H) - 1);
        for (long py = py_lo; py <= py_hi; ++py) {
            const bool in_head = (static_cast<double>(py) + 0.5) < rect->head_v_end;
            const Color3& color = in_head ? head : a.clothing;
            for (long px = px_lo; px <= px_hi; ++px) {
                const std::size_t idx = static_cast<std::size_t>(py) * W +
                                        static_cast<std::size_t>(px);
                if (rect->z >= zbuf[idx]) continue;
                zbuf[idx] = rect->z;
                frame.rgb[idx] = color.r;
                frame.rgb[H * W + idx] = color.g;
                frame.rgb[2 * H * W + idx] = color.b;
                frame.depth[idx] = rect->z;
            }
        }
    }

    if (noise_rng != nullptr) {
        std::normal_distribution<double> nrgb(0.0, sigma_rgb), ndepth(0.0, sigma_depth);
        for (double& v : frame.rgb) v = std::clamp(v + nrgb(*noise_rng), 0.0, 1.0);
        for (double& v : frame.depth) v = std::clamp(v + ndepth(*noise_rng), 0.0, kDepthMax);
    }
    return frame;
}

// Projected visible extent of one agent; empty when less than 5% of its
// projected pixels survive occlusion and frustum culling.
inline std::optional<BoundingBox> ground_truth_bbox(const WorldState& world,
                                                    const CameraModel& cam,
                                                    std::size_t index) {
    if (index >= world.agents.size()) throw ContractError("agent index out of range");
    const auto rect = detail::project_agent(world.robot, cam, world.agents[index]);
    if (!rect) return std::nullopt;

    // denominator: all pixel centers inside the unclipped projection
    const long full_w = detail::first_center(rect->u2) - detail::first_center(rect->u1);
    const long full_h = detail::first_center(rect->v2) - detail::first_center(rect->v1);
    if (full_w <= 0 || full_h <= 0) return std::nullopt;
    const double total = static_cast<double>(full_w) * static_cast<double>(full_h);

    std::vector<std::optional<detail::BillboardRect>> rects;
    rects.reserve(world.agents.size());
    for (const Agent& a : world.agents)
        rects.push_back(detail::project_agent(world.robot, cam, a));

    const long W = static_cast<long>(cam.image_w), H = static_cast<long>(cam.image_h);
    const long px_lo = std::max(detail::first_center(rect->u1), 0L);
    const long px_hi = std::min(detail::first_center(rect->u2) - 1, W - 1);
    const long py_lo = std::max(detail::first_center(rect->v1), 0L);
    const long py_hi = std::min(detail::first_center(rect->v2) - 1, H - 1);

    long visible = 0;
    long min_px = W, max_px = -1, min_py = H, max_py = -1;
    for (long py = py_lo; py <= py_hi; ++py) {
        const double vc = static_cast<double>(py) + 0.5;
        for (long px = px_lo; px <= px_hi; ++px) {
            const double uc = static_cast<double>(px) + 0.5;
            bool wins = true;
            for (std::size_t j = 0; j < rects.size() && wins; ++j) {
                if (j == index || !rects[j]) continue;
                const auto& o = *rects[j];
                if (uc < o.u1 || uc >= o.u2 || vc < o.v1 || vc >= o.v2) continue;
                // strict nearer wins; equal depth resolves to the lower index
                if (o.z < rect->z || (o.z == rect->z && j < index)) wins = false;
            }
            if (!wins) continue;
            ++visible;
            min_px = std::min(min_px, px);
            max_px = std::max(max_px, px);
            min_py = std::min(min_py, py);
            max_py = std::max(max_py, py);
        }
    }
    if (visible == 0 || static_cast<double>(visible) < kMinVisibleFraction * total)
        return std::nullopt;
    return BoundingBox(static_cast<double>(min_px) / static_cast<double>(W),
                       static_cast<double>(min_py) / static_cast<double>(H),
                       static_cast<double>(max_px + 1) / static_cast<double>(W),
                       static_cast<double>(max_py + 1) / static_cast<double>(H));
}

// Zero-noise motion-capture readout: robot position first, then every agent.
inline std::vector<Vec2> optitrack(const WorldState& world) {
    std::vector<Vec2> out;
    out.reserve(1 + world.agents.size());
    out.push_back({world.robot.x, world.robot.y});
    for (const Agent& a : world.agents) out.push_back(a.pos);
    return out;
}

}  // namespace ucf
