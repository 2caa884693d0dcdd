#include "fleetcast/losses.hpp"

#include <cmath>

namespace fleetcast {

void Trajectory::validate() const {
    if (states.empty()) throw ShapeError("trajectory has no states");
    if (!(dt > 0.0)) throw ConfigError("trajectory dt must be positive");
    const std::size_t n = states.front().size();
    if (n == 0) throw ShapeError("trajectory has no robots");
    for (const JointState& s : states) {
        if (s.size() != n)
            throw ShapeError("trajectory robot count changes between steps");
        for (const RobotState& r : s.robots)
            if (!std::isfinite(r.x) || !std::isfinite(r.y) ||
                !std::isfinite(r.theta) || !std::isfinite(r.v) ||
                !std::isfinite(r.omega))
                throw ConfigError("trajectory contains non-finite state");
    }
}

void LossWeights::validate() const {
    if (!(w_pred > 0.0 && w_uni > 0.0 && w_acc > 0.0))
        throw ConfigError("loss weights must be positive");
}

Matrix trajectory_channels(const Trajectory& traj, const NormScales& scales) {
    traj.validate();
    Matrix rows(traj.horizon(), kChannelsPerRobot * traj.robot_count());
    for (std::size_t t = 0; t < traj.horizon(); ++t)
        pack_channels(traj.states[t], scales, rows.row(t));
    return rows;
}

static void check_pair(const Trajectory& truth, const Trajectory& pred) {
    truth.validate();
    pred.validate();
    if (truth.horizon() != pred.horizon() ||
        truth.robot_count() != pred.robot_count() || truth.dt != pred.dt)
        throw ShapeError("trajectories must share horizon, robot count, and dt");
}

double pred_loss(const Trajectory& truth, const Trajectory& pred,
                 const NormScales& scales) {
    check_pair(truth, pred);
    if (pred.horizon() < 2) throw ShapeError("pred_loss needs T >= 2");
    const Matrix g = trajectory_channels(truth, scales);
    const Matrix p = trajectory_channels(pred, scales);
    double acc = 0.0;
    for (std::size_t t = 1; t < p.rows; ++t)
        for (std::size_t c = 0; c < p.cols; ++c) {
            const double d = p.at(t, c) - g.at(t, c);
            acc += d * d;
        }
    return acc / (static_cast<double>(p.cols) * (p.rows - 1));
}

double unicycle_loss(const Trajectory& pred) {
    pred.validate();
    if (pred.horizon() < 2) throw ShapeError("unicycle_loss needs T >= 2");
    const double dt = pred.dt;
    double acc = 0.0;
    for (std::size_t t = 0; t + 1 < pred.horizon(); ++t)
        for (std::size_t i = 0; i < pred.robot_count(); ++i) {
            const RobotState& a = pred.states[t].robots[i];
            const RobotState& b = pred.states[t + 1].robots[i];
            const double dx = (b.x - a.x) / dt;
            const double dy = (b.y - a.y) / dt;
            const double dth = wrap_angle(b.theta - a.theta) / dt;
            const double ex = dx - a.v * std::cos(a.theta);
            const double ey = dy - a.v * std::sin(a.theta);
            const double ew = dth - a.omega;
            acc += ex * ex + ey * ey + ew * ew;
        }
    return acc / (static_cast<double>(pred.robot_count()) * (pred.horizon() - 1));
}

double accel_loss(const Trajectory& pred) {
    pred.validate();
    if (pred.horizon() < 2) throw ShapeError("accel_loss needs T >= 2");
    const double dt = pred.dt;
    double acc = 0.0;
    for (std::size_t t = 0; t + 1 < pred.horizon(); ++t)
        for (std::size_t i = 0; i < pred.robot_count(); ++i) {
            const double d = (std::abs(pred.states[t + 1].robots[i].v) -
                              std::abs(pred.states[t].robots[i].v)) /
                             dt;
            acc += d * d;
        }
    return acc / (static_cast<double>(pred.robot_count()) * (pred.horizon() - 1));
}

namespace {

// The training ablation runs with the physics terms switched off, so the
// evaluators accept zero w_uni/w_acc even though user-facing configs insist
// on strictly positive weights.
void check_eval_weights(const LossWeights& w) {
    if (!(w.w_pred > 0.0) || !(w.w_uni >= 0.0) || !(w.w_acc >= 0.0))
        throw ConfigError("loss weights: w_pred must be positive, others non-negative");
}

}  // namespace

LossBreakdown pifl_loss(const Trajectory& truth, const Trajectory& pred,
                        const NormScales& scales, const LossWeights& weights) {
    check_eval_weights(weights);
    LossBreakdown out;
    out.pred = pred_loss(truth, pred, scales);
    out.uni = unicycle_loss(pred);
    out.acc = accel_loss(pred);
    out.total = weights.w_pred * out.pred + weights.w_uni * out.uni +
                weights.w_acc * out.acc;
    return out;
}

double ade(const Trajectory& truth, const Trajectory& pred,
           std::size_t horizon_s) {
    check_pair(truth, pred);
    if (horizon_s < 1 || horizon_s > pred.horizon())
        throw ConfigError("ade horizon out of range");
    double acc = 0.0;
    for (std::size_t t = 0; t < horizon_s; ++t)
        for (std::size_t i = 0; i < pred.robot_count(); ++i) {
            const RobotState& a = truth.states[t].robots[i];
            const RobotState& b = pred.states[t].robots[i];
            acc += std::hypot(b.x - a.x, b.y - a.y);
        }
    return acc / (static_cast<double>(pred.robot_count()) * horizon_s);
}

std::vector<std::size_t> error_histogram(const std::vector<double>& values,
                                         double bin_width) {
    if (values.empty()) throw ConfigError("error_histogram: empty value list");
    if (!(bin_width > 0.0)) throw ConfigError("error_histogram: bin width <= 0");
    std::vector<std::size_t> counts;
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ConfigError("error_histogram: values must be finite and >= 0");
        const auto bin = static_cast<std::size_t>(v / bin_width);
        if (bin >= counts.size()) counts.resize(bin + 1, 0);
        ++counts[bin];
    }
    return counts;
}

LossBreakdown pifl_loss_channels(const Matrix& truth_channels,
                                 const Matrix& pred_channels,
                                 const NormScales& scales,
                                 const LossWeights& weights, double dt,
                                 Matrix* grad) {
    check_eval_weights(weights);
    const Matrix& g = truth_channels;
    const Matrix& p = pred_channels;
    if (g.rows != p.rows || g.cols != p.cols)
        throw ShapeError("pifl_loss_channels: truth/pred shape mismatch");
    if (p.rows < 2) throw ShapeError("pifl_loss_channels: needs T >= 2");
    if (p.cols == 0 || p.cols % kChannelsPerRobot != 0)
        throw ShapeError("pifl_loss_channels: columns must be 6N");
    if (grad && (grad->rows != p.rows || grad->cols != p.cols))
        throw ShapeError("pifl_loss_channels: grad shape mismatch");
    if (!(dt > 0.0)) throw ConfigError("pifl_loss_channels: dt must be positive");

    const std::size_t horizon = p.rows;
    const std::size_t n = p.cols / kChannelsPerRobot;
    const double ps = scales.pos, vs = scales.vel, ws = scales.omega;
    LossBreakdown out;

    const double pred_denom = static_cast<double>(p.cols) * (horizon - 1);
    for (std::size_t t = 1; t < horizon; ++t)
        for (std::size_t c = 0; c < p.cols; ++c) {
            const double d = p.at(t, c) - g.at(t, c);
            out.pred += d * d;
            if (grad) grad->at(t, c) += weights.w_pred * 2.0 * d / pred_denom;
        }
    out.pred /= pred_denom;

    const double denom = static_cast<double>(n) * (horizon - 1);
    const double ku = weights.w_uni / denom;
    const double ka = weights.w_acc / denom;
    for (std::size_t t = 0; t + 1 < horizon; ++t)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = kChannelsPerRobot * i;
            const double c0 = p.at(t, c + 2), s0 = p.at(t, c + 3);
            const double c1 = p.at(t + 1, c + 2), s1 = p.at(t + 1, c + 3);
            const double th0 = std::atan2(s0, c0), th1 = std::atan2(s1, c1);
            const double v0 = p.at(t, c + 4) * vs;
            const double om0 = p.at(t, c + 5) * ws;
            const double dx = (p.at(t + 1, c) - p.at(t, c)) * ps / dt;
            const double dy = (p.at(t + 1, c + 1) - p.at(t, c + 1)) * ps / dt;
            const double dth = wrap_angle(th1 - th0) / dt;
            const double ex = dx - v0 * std::cos(th0);
            const double ey = dy - v0 * std::sin(th0);
            const double ew = dth - om0;
            out.uni += ex * ex + ey * ey + ew * ew;

            const double v1 = p.at(t + 1, c + 4) * vs;
            const double dspeed = (std::abs(v1) - std::abs(v0)) / dt;
            out.acc += dspeed * dspeed;

            if (!grad) continue;
            grad->at(t + 1, c) += ku * 2.0 * ex / dt * ps;
            grad->at(t, c) -= ku * 2.0 * ex / dt * ps;
            grad->at(t + 1, c + 1) += ku * 2.0 * ey / dt * ps;
            grad->at(t, c + 1) -= ku * 2.0 * ey / dt * ps;
            grad->at(t, c + 4) +=
                ku * (-2.0 * ex * std::cos(th0) - 2.0 * ey * std::sin(th0)) * vs;
            grad->at(t, c + 5) += ku * -2.0 * ew * ws;
            const double dth1 = ku * 2.0 * ew / dt;
            const double dth0 =
                ku * (-2.0 * ew / dt + 2.0 * ex * v0 * std::sin(th0) -
                      2.0 * ey * v0 * std::cos(th0));
            const double q1 = c1 * c1 + s1 * s1;
            const double q0 = c0 * c0 + s0 * s0;
            grad->at(t + 1, c + 2) += dth1 * (-s1 / q1);
            grad->at(t + 1, c + 3) += dth1 * (c1 / q1);
            grad->at(t, c + 2) += dth0 * (-s0 / q0);
            grad->at(t, c + 3) += dth0 * (c0 / q0);
            const auto sgn = [](double x) {
                return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            };
            grad->at(t + 1, c + 4) += ka * 2.0 * dspeed / dt * sgn(v1) * vs;
            grad->at(t, c + 4) -= ka * 2.0 * dspeed / dt * sgn(v0) * vs;
        }
    out.uni /= denom;
    out.acc /= denom;
    out.total = weights.w_pred * out.pred + weights.w_uni * out.uni +
                weights.w_acc * out.acc;
    return out;
}

Trajectory unicycle_rollout(const JointState& start, const Matrix& controls,
                            std::size_t horizon, double dt) {
    const std::size_t n = start.size();
    if (n == 0) throw ShapeError("unicycle_rollout: empty start state");
    if (controls.cols != 2 * n)
        throw ShapeError("unicycle_rollout: controls must have 2N columns");
    if (horizon == 0 || horizon > controls.rows)
        throw ShapeError("unicycle_rollout: horizon exceeds control rows");
    if (!(dt > 0.0)) throw ConfigError("unicycle_rollout: dt must be positive");

    Trajectory out;
    out.dt = dt;
    out.states.resize(horizon);
    JointState cur = start;
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            cur.robots[i].v = controls.at(t, 2 * i);
            cur.robots[i].omega = controls.at(t, 2 * i + 1);
        }
        out.states[t] = cur;
        for (std::size_t i = 0; i < n; ++i) {
            RobotState& r = cur.robots[i];
            r.x += r.v * std::cos(r.theta) * dt;
            r.y += r.v * std::sin(r.theta) * dt;
            r.theta = wrap_angle(r.theta + r.omega * dt);
        }
    }
    return out;
}

}  // namespace fleetcast
