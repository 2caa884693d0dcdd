#pragma once

#include <string>

#include "fleetcast/losses.hpp"

namespace fleetcast {

/// Writes a forecast picture: prediction paths with a heading arrow every
/// arrow_every_s seconds (arrow length proportional to speed), ground truth
/// dashed underneath when given. Arena dimensions set the frame; pass
/// non-positive dims to fit the frame to the drawn paths instead.
void save_forecast_svg(const std::string& path, const Trajectory& prediction,
                       const Trajectory* truth = nullptr,
                       double arena_width = 0.0, double arena_height = 0.0,
                       int arrow_every_s = 5);

}  // namespace fleetcast
