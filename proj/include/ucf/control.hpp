#pragma once

// PI velocity control for following: a range controller on the measured
// depth at the tracked box and a bearing controller on the horizontal image
// error. Both integrators are clamped (anti-windup), and outputs are clamped
// symmetrically; an extra floor on the linear command limits reverse speed.

#include <cmath>
#include <optional>
#include <utility>

#include "ucf/common.hpp"
#include "ucf/geometry.hpp"

namespace ucf {

inline constexpr double kFollowDistance = 2.0;   // m, also the start distance
inline constexpr double kReverseSpeedLimit = 0.3;  // m/s, max backing-up speed

struct PIController {
    double kp = 0.0;
    double ki = 0.0;
    double output_limit = 1.0;    // symmetric clamp on u
    double integral_limit = 2.0;  // symmetric clamp on the accumulated error
    double integral = 0.0;
};

// Defaults tuned once against the no-distractor scenario. The range
// integrator must be able to hold the whole feed-forward speed of a
// constant-velocity target (0.8 m/s / ki), hence the larger linear limits,
// and the error envelope decays like exp(-kp/2 t), hence kp above 1.
inline PIController default_linear_controller() { return {1.2, 0.4, 1.2, 5.0, 0.0}; }
inline PIController default_angular_controller() { return {2.0, 0.2, 1.5, 2.0, 0.0}; }

inline double pi_update(PIController& ctrl, double e, double dt) {
    if (dt <= 0.0) throw ContractError("pi_update: dt must be positive");
    ctrl.integral = std::clamp(ctrl.integral + e * dt, -ctrl.integral_limit,
                               ctrl.integral_limit);
    const double u = ctrl.kp * e + ctrl.ki * ctrl.integral;
    return std::clamp(u, -ctrl.output_limit, ctrl.output_limit);
}

// Tracker box + measured depth -> (v, omega). A lost target stops the robot
// and freezes both integrators. Positive omega turns counter-clockwise, so a
// target left of center (cx < 0.5) yields a positive turn command.
inline std::pair<double, double> follow_control(const std::optional<BoundingBox>& box,
                                                double depth_at_box, PIController& linear,
                                                PIController& angular, double dt,
                                                double follow_distance = kFollowDistance,
                                                double reverse_limit = kReverseSpeedLimit) {
    if (!box.has_value()) return {0.0, 0.0};
    const double e_linear = depth_at_box - follow_distance;
    const double e_angular = 0.5 - box->cx();
    double v = pi_update(linear, e_linear, dt);
    v = std::max(v, -reverse_limit);
    const double omega = pi_update(angular, e_angular, dt);
    return {v, omega};
}

}  // namespace ucf
