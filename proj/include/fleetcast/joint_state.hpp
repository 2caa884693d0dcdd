#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fleetcast/errors.hpp"

namespace fleetcast {

/// Wrap to (-pi, pi].
inline double wrap_angle(double a) {
    const double two_pi = 6.283185307179586476925286766559;
    double r = std::fmod(a + 3.14159265358979323846, two_pi);
    if (r <= 0.0) r += two_pi;
    return r - 3.14159265358979323846;
}

struct RobotState {
    double x = 0.0;      // m
    double y = 0.0;      // m
    double theta = 0.0;  // rad, (-pi, pi]
    double v = 0.0;      // m/s
    double omega = 0.0;  // rad/s
};

struct JointState {
    std::vector<RobotState> robots;
    std::size_t size() const { return robots.size(); }
};

/// Channel scales that map physical units to O(1) network inputs.
struct NormScales {
    double pos = 50.0;    // m      (arena half-extent)
    double vel = 2.0;     // m/s    (v_max)
    double omega = 1.5;   // rad/s  (omega_max)
};

constexpr std::size_t kChannelsPerRobot = 6;  // x, y, cos, sin, v, omega

/// Normalized channel layout per robot i at offset 6i:
/// (x/pos, y/pos, cos theta, sin theta, v/vel, omega/omega).
inline void pack_channels(const JointState& s, const NormScales& n,
                          std::span<double> out) {
    if (out.size() != kChannelsPerRobot * s.size())
        throw ShapeError("pack_channels: output span must be 6N");
    for (std::size_t i = 0; i < s.size(); ++i) {
        const RobotState& r = s.robots[i];
        if (!std::isfinite(r.x) || !std::isfinite(r.y) || !std::isfinite(r.theta) ||
            !std::isfinite(r.v) || !std::isfinite(r.omega))
            throw ConfigError("pack_channels: robot state is not finite");
        double* c = out.data() + kChannelsPerRobot * i;
        c[0] = r.x / n.pos;
        c[1] = r.y / n.pos;
        c[2] = std::cos(r.theta);
        c[3] = std::sin(r.theta);
        c[4] = r.v / n.vel;
        c[5] = r.omega / n.omega;
    }
}

/// Inverse of pack_channels. The heading comes back through atan2, so any
/// positive common rescaling of the (cos, sin) pair decodes identically;
/// a pair whose norm falls below min_heading_norm is rejected as degenerate.
inline JointState unpack_channels(std::span<const double> ch, const NormScales& n,
                                  double min_heading_norm = 0.05) {
    if (ch.size() % kChannelsPerRobot != 0)
        throw ShapeError("unpack_channels: channel count must be a multiple of 6");
    JointState s;
    s.robots.resize(ch.size() / kChannelsPerRobot);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double* c = ch.data() + kChannelsPerRobot * i;
        RobotState& r = s.robots[i];
        const double norm = std::hypot(c[2], c[3]);
        if (!(norm >= min_heading_norm))
            throw DegenerateHeadingError(
                "heading channels too small to recover an angle (norm " +
                std::to_string(norm) + ")");
        r.x = c[0] * n.pos;
        r.y = c[1] * n.pos;
        r.theta = std::atan2(c[3], c[2]);
        r.v = c[4] * n.vel;
        r.omega = c[5] * n.omega;
    }
    return s;
}

/// Soft validity band for decoded heading channels: cos^2 + sin^2 of a
/// healthy decode stays within [0.25, 4].
inline bool heading_norms_in_band(std::span<const double> ch) {
    for (std::size_t i = 0; i + kChannelsPerRobot <= ch.size();
         i += kChannelsPerRobot) {
        const double q = ch[i + 2] * ch[i + 2] + ch[i + 3] * ch[i + 3];
        if (q < 0.25 || q > 4.0) return false;
    }
    return true;
}

}  // namespace fleetcast
