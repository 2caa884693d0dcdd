#pragma once

#include <span>
#include <vector>

#include "fleetcast/matrix.hpp"
#include "fleetcast/spline.hpp"

namespace fleetcast {

/// 1 Hz reference-velocity schedule for a fleet: values is (T, 2N) laid out
/// as (v_0, w_0, v_1, w_1, ...) per row, one row per integer second.
struct ControlSequence {
    std::size_t robot_count = 0;
    Matrix values;  // (T, 2N)

    std::size_t horizon() const { return values.rows; }
    void validate(double v_max, double w_max) const;
};

/// Knot matrix (T+1, 2N+1): channel 0 is time (t_k itself, unit slope), the
/// rest are per-channel cumulative sums of the reference velocities. When
/// with_time_channel is false channel 0 stays identically zero, which makes
/// the whole path derivative vanish for all-zero controls.
Matrix cumsum_path(const ControlSequence& seq, double dt = 1.0,
                   bool with_time_channel = true);

/// Smooth goal-conditioning signal C(t) driving the latent dynamics.
class ControlPath {
public:
    ControlPath() = default;
    ControlPath(const ControlSequence& seq, double dt = 1.0,
                bool with_time_channel = true);
    /// Path over an explicit knot matrix (rows = knots, cols = channels).
    ControlPath(std::vector<double> knot_times, Matrix knot_values,
                std::size_t robot_count = 0);

    std::size_t robot_count() const { return robot_count_; }
    std::size_t channels() const { return spline_.channels(); }  // D_C = 2N+1
    double t_begin() const { return spline_.t_begin(); }
    double t_end() const { return spline_.t_end(); }
    const HermiteSpline& spline() const { return spline_; }

private:
    std::size_t robot_count_ = 0;
    HermiteSpline spline_;
};

/// C(t); clamps to boundary values outside the span, returns the clamp flag.
bool path_eval(const ControlPath& path, double t, std::span<double> out);

/// dC/dt(t); exactly zero outside the knot span.
void path_deriv(const ControlPath& path, double t, std::span<double> out);

}  // namespace fleetcast
