#pragma once

#include <vector>

#include "fleetcast/joint_state.hpp"
#include "fleetcast/matrix.hpp"

namespace fleetcast {

/// 1 Hz sequence of joint fleet states, t = 0..T-1.
struct Trajectory {
    std::vector<JointState> states;
    double dt = 1.0;

    std::size_t horizon() const { return states.size(); }
    std::size_t robot_count() const {
        return states.empty() ? 0 : states.front().size();
    }
    void validate() const;
};

struct LossWeights {
    double w_pred = 1.0;
    double w_uni = 10.0;
    double w_acc = 10.0;
    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double pred = 0.0;  // normalized channel space
    double uni = 0.0;   // physical units (m, rad, s)
    double acc = 0.0;   // physical units
};

/// Mean squared error over normalized channels, robots, and t in {1..T-1}
/// (t = 0 is the shared initial condition, never scored).
double pred_loss(const Trajectory& truth, const Trajectory& pred,
                 const NormScales& scales);

/// Unicycle-consistency residual of a predicted trajectory against itself:
/// forward differences of pose vs the trajectory's own (v, omega, theta) at
/// the left endpoint, heading differences wrapped through +-pi. Mean over
/// robots and t in {0..T-2}; physical units.
double unicycle_loss(const Trajectory& pred);

/// Mean squared change of consecutive speed magnitudes |v| per second,
/// over robots and t in {0..T-2}.
double accel_loss(const Trajectory& pred);

LossBreakdown pifl_loss(const Trajectory& truth, const Trajectory& pred,
                        const NormScales& scales, const LossWeights& weights);

/// Mean Euclidean position error in meters over robots and t in
/// {0..horizon_s-1}; horizon_s must not exceed either trajectory.
double ade(const Trajectory& truth, const Trajectory& pred, std::size_t horizon_s);

/// Fixed-width histogram from 0: value v lands in bin floor(v / bin_width).
std::vector<std::size_t> error_histogram(const std::vector<double>& values,
                                         double bin_width);

/// Training-path evaluator on packed channel matrices (T, 6N): same numbers
/// as pifl_loss on the unpacked trajectories, plus the analytic gradient
/// w.r.t. every predicted channel (accumulated into grad when non-null).
LossBreakdown pifl_loss_channels(const Matrix& truth_channels,
                                 const Matrix& pred_channels,
                                 const NormScales& scales,
                                 const LossWeights& weights, double dt = 1.0,
                                 Matrix* grad = nullptr);

/// Packs each state of a trajectory into one channel row.
Matrix trajectory_channels(const Trajectory& traj, const NormScales& scales);

/// Open-loop analytical forecaster: forward-Euler unicycle rollout of the
/// commanded 1 Hz velocities from the start pose. controls is (T, 2N) with
/// per-robot (v, omega) columns; row t drives the step from t to t+1. The
/// result has horizon rows; its t = 0 state is start with row-0 velocities.
Trajectory unicycle_rollout(const JointState& start, const Matrix& controls,
                            std::size_t horizon, double dt = 1.0);

}  // namespace fleetcast
