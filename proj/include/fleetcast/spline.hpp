#pragma once

#include <span>
#include <vector>

#include "fleetcast/matrix.hpp"

namespace fleetcast {

/// Multi-channel piecewise cubic Hermite spline with backward-difference
/// tangents (the first knot copies the second knot's tangent, which keeps
/// straight-line data exactly straight). Immutable once fitted; concurrent
/// evaluation is safe.
class HermiteSpline {
public:
    HermiteSpline() = default;
    /// values is (K, C): K knots, C channels. Times must rise strictly.
    HermiteSpline(std::vector<double> knot_times, Matrix knot_values);

    std::size_t knot_count() const { return times_.size(); }
    std::size_t channels() const { return values_.cols; }
    double t_begin() const { return times_.front(); }
    double t_end() const { return times_.back(); }
    const std::vector<double>& knot_times() const { return times_; }
    const Matrix& knot_values() const { return values_; }
    const Matrix& tangents() const { return tangents_; }

    /// Value at t, clamped to the boundary value outside the knot span.
    /// Returns true when t was outside and clamping happened.
    bool eval(double t, std::span<double> out) const;

    /// Derivative at t; exactly zero outside the knot span. Boundary times
    /// use the one-sided limit from inside.
    void deriv(double t, std::span<double> out) const;

private:
    std::size_t interval_for(double t) const;

    std::vector<double> times_;
    Matrix values_;    // (K, C) — also the u^0 coefficient per interval start
    Matrix tangents_;  // (K, C)
    // Cubic per interval k and channel c in local u = (t - t_k) / dt_k:
    // p(u) = values_(k,c) + u*(b + u*(cc + u*d)).
    Matrix b_, cc_, d_;  // ((K-1), C)
};

/// Scalar interpolating C^2 cubic spline with not-a-knot end conditions
/// (natural ends when only three knots are given). Outside the knot span it
/// extends the boundary cubic.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> knot_times, std::vector<double> knot_values);

    std::size_t knot_count() const { return times_.size(); }
    double t_begin() const { return times_.front(); }
    double t_end() const { return times_.back(); }

    double eval(double t) const;
    double deriv(double t) const;

private:
    std::size_t interval_for(double t) const;

    std::vector<double> times_;
    // Per interval k in u = t - t_k: y + u*(b + u*(c + u*d)).
    std::vector<double> y_, b_, c_, d_;
};

}  // namespace fleetcast
