#include "fleetcast/control_path.hpp"

#include <cmath>

#include "fleetcast/errors.hpp"

namespace fleetcast {

void ControlSequence::validate(double v_max, double w_max) const {
    if (robot_count == 0) throw ConfigError("control sequence has no robots");
    if (values.cols != 2 * robot_count)
        throw ShapeError("control sequence values must have 2N columns");
    if (values.rows == 0) throw ConfigError("control sequence has no samples");
    for (std::size_t t = 0; t < values.rows; ++t)
        for (std::size_t i = 0; i < robot_count; ++i) {
            const double v = values.at(t, 2 * i);
            const double w = values.at(t, 2 * i + 1);
            if (!std::isfinite(v) || !std::isfinite(w))
                throw ConfigError("control sequence contains non-finite values");
            if (std::abs(v) > v_max || std::abs(w) > w_max)
                throw ConfigError("control sequence exceeds velocity limits");
        }
}

Matrix cumsum_path(const ControlSequence& seq, double dt, bool with_time_channel) {
    if (dt <= 0.0) throw ConfigError("cumsum_path: dt must be positive");
    if (seq.values.cols != 2 * seq.robot_count)
        throw ShapeError("cumsum_path: control sequence has wrong column count");
    const std::size_t t_len = seq.values.rows;
    const std::size_t n_ch = 2 * seq.robot_count + 1;
    Matrix knots(t_len + 1, n_ch);
    for (std::size_t k = 0; k <= t_len; ++k)
        knots.at(k, 0) = with_time_channel ? static_cast<double>(k) * dt : 0.0;
    for (std::size_t k = 1; k <= t_len; ++k)
        for (std::size_t j = 0; j < 2 * seq.robot_count; ++j)
            knots.at(k, j + 1) = knots.at(k - 1, j + 1) + seq.values.at(k - 1, j) * dt;
    return knots;
}

ControlPath::ControlPath(const ControlSequence& seq, double dt,
                         bool with_time_channel)
    : robot_count_(seq.robot_count) {
    Matrix knots = cumsum_path(seq, dt, with_time_channel);
    std::vector<double> times(knots.rows);
    for (std::size_t k = 0; k < knots.rows; ++k)
        times[k] = static_cast<double>(k) * dt;
    spline_ = HermiteSpline(std::move(times), std::move(knots));
}

ControlPath::ControlPath(std::vector<double> knot_times, Matrix knot_values,
                         std::size_t robot_count)
    : robot_count_(robot_count),
      spline_(std::move(knot_times), std::move(knot_values)) {}

bool path_eval(const ControlPath& path, double t, std::span<double> out) {
    return path.spline().eval(t, out);
}

void path_deriv(const ControlPath& path, double t, std::span<double> out) {
    path.spline().deriv(t, out);
}

}  // namespace fleetcast
