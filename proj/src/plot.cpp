#include "fleetcast/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "fleetcast/errors.hpp"

namespace fleetcast {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#17becf", "#e377c2", "#8c564b",
                          "#bcbd22", "#7f7f7f"};

struct Frame {
    double min_x, min_y, max_x, max_y;  // meters, y up
    double scale;                       // px per meter

    double px(double x) const { return (x - min_x) * scale; }
    double py(double y) const { return (max_y - y) * scale; }  // SVG y is down
};

void grow(const Trajectory& traj, double& lo_x, double& lo_y, double& hi_x,
          double& hi_y) {
    for (const auto& s : traj.states)
        for (const auto& r : s.robots) {
            lo_x = std::min(lo_x, r.x);
            hi_x = std::max(hi_x, r.x);
            lo_y = std::min(lo_y, r.y);
            hi_y = std::max(hi_y, r.y);
        }
}

void polyline(std::string& out, const Frame& f, const Trajectory& traj,
              std::size_t robot, const char* cls, const char* color,
              const char* dash) {
    char buf[64];
    out += "  <polyline class=\"";
    out += cls;
    out += "\" fill=\"none\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"1.5\"";
    if (dash[0]) {
        out += " stroke-dasharray=\"";
        out += dash;
        out += "\"";
    }
    out += " points=\"";
    for (const auto& s : traj.states) {
        const RobotState& r = s.robots[robot];
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", f.px(r.x), f.py(r.y));
        out += buf;
    }
    out += "\"/>\n";
}

/// One heading arrow: shaft from the pose along theta, length ~ speed
/// (1.5 s of travel, clamped so slow robots stay visible), plus two head
/// strokes. Grouped so structural checks can count arrows per robot.
void arrow(std::string& out, const Frame& f, const RobotState& r,
           const char* color) {
    const double len_m = std::max(0.3, r.v * 1.5);
    const double tip_x = r.x + len_m * std::cos(r.theta);
    const double tip_y = r.y + len_m * std::sin(r.theta);
    const double head = 0.35 * len_m;
    char buf[512];
    std::snprintf(
        buf, sizeof buf,
        "  <g class=\"arrow\" stroke=\"%s\" stroke-width=\"1.2\">\n"
        "    <line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\"/>\n"
        "    <line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\"/>\n"
        "    <line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\"/>\n"
        "  </g>\n",
        color, f.px(r.x), f.py(r.y), f.px(tip_x), f.py(tip_y), f.px(tip_x),
        f.py(tip_y), f.px(tip_x - head * std::cos(r.theta - 0.5)),
        f.py(tip_y - head * std::sin(r.theta - 0.5)), f.px(tip_x),
        f.py(tip_y), f.px(tip_x - head * std::cos(r.theta + 0.5)),
        f.py(tip_y - head * std::sin(r.theta + 0.5)));
    out += buf;
}

}  // namespace

void save_forecast_svg(const std::string& path, const Trajectory& prediction,
                       const Trajectory* truth, double arena_width,
                       double arena_height, int arrow_every_s) {
    prediction.validate();
    if (truth) {
        truth->validate();
        if (truth->robot_count() != prediction.robot_count())
            throw ShapeError("svg: truth and prediction robot counts differ");
    }
    if (arrow_every_s < 1) throw ConfigError("svg: arrow spacing must be >= 1 s");

    Frame f{};
    if (arena_width > 0 && arena_height > 0) {
        f.min_x = -arena_width / 2;
        f.max_x = arena_width / 2;
        f.min_y = -arena_height / 2;
        f.max_y = arena_height / 2;
    } else {
        f.min_x = f.min_y = 1e300;
        f.max_x = f.max_y = -1e300;
        grow(prediction, f.min_x, f.min_y, f.max_x, f.max_y);
        if (truth) grow(*truth, f.min_x, f.min_y, f.max_x, f.max_y);
        const double pad = 2.0;
        f.min_x -= pad;
        f.min_y -= pad;
        f.max_x += pad;
        f.max_y += pad;
    }
    const double span = std::max(f.max_x - f.min_x, f.max_y - f.min_y);
    f.scale = 800.0 / std::max(span, 1e-9);

    const double w = (f.max_x - f.min_x) * f.scale;
    const double h = (f.max_y - f.min_y) * f.scale;
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" "
                  "height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                  w, h, w, h);
    out += buf;
    out += "  <!-- fleetcast forecast svg v1 -->\n";
    std::snprintf(buf, sizeof buf,
                  "  <rect x=\"0\" y=\"0\" width=\"%.0f\" height=\"%.0f\" "
                  "fill=\"#fafafa\" stroke=\"#444\"/>\n",
                  w, h);
    out += buf;

    const std::size_t n = prediction.robot_count();
    const std::size_t palette_n = sizeof kPalette / sizeof kPalette[0];
    for (std::size_t i = 0; i < n; ++i) {
        const char* color = kPalette[i % palette_n];
        std::snprintf(buf, sizeof buf, "  <g class=\"robot\" id=\"robot-%zu\">\n", i);
        out += buf;
        if (truth) polyline(out, f, *truth, i, "truth", "#999999", "6 4");
        polyline(out, f, prediction, i, "prediction", color, "");
        for (std::size_t t = static_cast<std::size_t>(arrow_every_s);
             t < prediction.states.size();
             t += static_cast<std::size_t>(arrow_every_s))
            arrow(out, f, prediction.states[t].robots[i], color);
        out += "  </g>\n";
    }
    out += "</svg>\n";

    std::ofstream file(path, std::ios::trunc);
    if (!file) throw IoError("cannot open svg for writing: " + path);
    file << out;
    if (!file) throw IoError("failed while writing svg: " + path);
}

}  // namespace fleetcast
