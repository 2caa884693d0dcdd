#include "fleetcast/spline.hpp"

#include <algorithm>
#include <cmath>

#include "fleetcast/errors.hpp"

namespace fleetcast {

HermiteSpline::HermiteSpline(std::vector<double> knot_times, Matrix knot_values)
    : times_(std::move(knot_times)), values_(std::move(knot_values)) {
    const std::size_t k = times_.size();
    if (k < 2) throw ConfigError("spline needs at least two knots");
    if (values_.rows != k)
        throw ShapeError("spline knot_values rows must match knot_times length");
    for (std::size_t i = 0; i + 1 < k; ++i)
        if (!(times_[i] < times_[i + 1]))
            throw ConfigError("spline knot times must be strictly increasing");
    for (double t : times_)
        if (!std::isfinite(t)) throw ConfigError("spline knot time is not finite");
    if (!values_.all_finite())
        throw ConfigError("spline knot values must be finite");

    const std::size_t c = values_.cols;
    tangents_ = Matrix(k, c);
    for (std::size_t i = 1; i < k; ++i) {
        const double dt = times_[i] - times_[i - 1];
        for (std::size_t j = 0; j < c; ++j)
            tangents_.at(i, j) = (values_.at(i, j) - values_.at(i - 1, j)) / dt;
    }
    for (std::size_t j = 0; j < c; ++j) tangents_.at(0, j) = tangents_.at(1, j);

    b_ = Matrix(k - 1, c);
    cc_ = Matrix(k - 1, c);
    d_ = Matrix(k - 1, c);
    for (std::size_t i = 0; i + 1 < k; ++i) {
        const double dt = times_[i + 1] - times_[i];
        for (std::size_t j = 0; j < c; ++j) {
            const double p0 = values_.at(i, j), p1 = values_.at(i + 1, j);
            const double m0 = dt * tangents_.at(i, j);
            const double m1 = dt * tangents_.at(i + 1, j);
            b_.at(i, j) = m0;
            cc_.at(i, j) = 3.0 * (p1 - p0) - 2.0 * m0 - m1;
            d_.at(i, j) = 2.0 * (p0 - p1) + m0 + m1;
        }
    }
}

std::size_t HermiteSpline::interval_for(double t) const {
    // First knot strictly greater than t, minus one; t == t_k lands in the
    // interval starting at k so u = 0 reproduces the knot bit-exactly.
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t idx = static_cast<std::size_t>(it - times_.begin());
    return idx == 0 ? 0 : idx - 1;
}

bool HermiteSpline::eval(double t, std::span<double> out) const {
    if (out.size() != values_.cols) throw ShapeError("spline eval output size");
    if (t <= times_.front()) {
        const auto first = values_.row(0);
        std::copy(first.begin(), first.end(), out.begin());
        return t < times_.front();
    }
    if (t >= times_.back()) {
        const auto last = values_.row(values_.rows - 1);
        std::copy(last.begin(), last.end(), out.begin());
        return t > times_.back();
    }
    const std::size_t i = interval_for(t);
    const double dt = times_[i + 1] - times_[i];
    double u = (t - times_[i]) / dt;
    u = std::clamp(u, 0.0, 1.0);
    for (std::size_t j = 0; j < values_.cols; ++j)
        out[j] = values_.at(i, j) + u * (b_.at(i, j) + u * (cc_.at(i, j) + u * d_.at(i, j)));
    return false;
}

void HermiteSpline::deriv(double t, std::span<double> out) const {
    if (out.size() != values_.cols) throw ShapeError("spline deriv output size");
    if (t < times_.front() || t > times_.back()) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    std::size_t i;
    double u;
    if (t == times_.back()) {
        i = values_.rows - 2;
        u = 1.0;
    } else {
        i = interval_for(t);
        const double dt_i = times_[i + 1] - times_[i];
        u = std::clamp((t - times_[i]) / dt_i, 0.0, 1.0);
    }
    const double dt = times_[i + 1] - times_[i];
    for (std::size_t j = 0; j < values_.cols; ++j)
        out[j] = (b_.at(i, j) + u * (2.0 * cc_.at(i, j) + u * 3.0 * d_.at(i, j))) / dt;
}

CubicSpline::CubicSpline(std::vector<double> knot_times,
                                       std::vector<double> knot_values)
    : times_(std::move(knot_times)), y_(std::move(knot_values)) {
    const std::size_t n = times_.size();
    if (n < 2) throw ConfigError("spline needs at least two knots");
    if (y_.size() != n)
        throw ShapeError("spline knot value count must match knot times");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(times_[i] < times_[i + 1]))
            throw ConfigError("spline knot times must be strictly increasing");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(times_[i]) || !std::isfinite(y_[i]))
            throw ConfigError("spline knots must be finite");

    // Second derivatives m from the C^2 tridiagonal system, solved by the
    // Thomas algorithm over the interior unknowns. With four or more knots
    // the ends use not-a-knot conditions (third derivative continuous across
    // the second and second-to-last knots), eliminating m_0 and m_{n-1}:
    //   m_0     = m_1 (1 + h_0/h_1) - m_2 h_0/h_1
    //   m_{n-1} = m_{n-2} (1 + h_{n-2}/h_{n-3}) - m_{n-3} h_{n-2}/h_{n-3}
    // Three knots fall back to natural ends (m_0 = m_2 = 0).
    std::vector<double> m(n, 0.0);
    if (n > 2) {
        const std::size_t k = n - 2;  // unknowns m_1 .. m_{n-2}
        std::vector<double> diag(k), rhs(k), upper(k, 0.0), lower(k, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hl = times_[i] - times_[i - 1];
            const double hr = times_[i + 1] - times_[i];
            diag[i - 1] = 2.0 * (hl + hr);
            if (i >= 2) lower[i - 1] = hl;
            if (i + 2 < n) upper[i - 1] = hr;
            rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl);
        }
        if (n >= 4) {
            const double h0 = times_[1] - times_[0];
            const double h1 = times_[2] - times_[1];
            diag[0] += h0 * (1.0 + h0 / h1);
            upper[0] -= h0 * h0 / h1;
            const double he = times_[n - 1] - times_[n - 2];
            const double hp = times_[n - 2] - times_[n - 3];
            diag[k - 1] += he * (1.0 + he / hp);
            lower[k - 1] -= he * he / hp;
        }
        for (std::size_t i = 1; i < k; ++i) {
            const double w = lower[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = k; i-- > 0;) {
            const double up = (i + 1 < k) ? upper[i] * m[i + 2] : 0.0;
            m[i + 1] = (rhs[i] - up) / diag[i];
        }
        if (n >= 4) {
            const double h0 = times_[1] - times_[0];
            const double h1 = times_[2] - times_[1];
            m[0] = m[1] * (1.0 + h0 / h1) - m[2] * (h0 / h1);
            const double he = times_[n - 1] - times_[n - 2];
            const double hp = times_[n - 2] - times_[n - 3];
            m[n - 1] = m[n - 2] * (1.0 + he / hp) - m[n - 3] * (he / hp);
        }
    }

    b_.resize(n - 1);
    c_.resize(n - 1);
    d_.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = times_[i + 1] - times_[i];
        b_[i] = (y_[i + 1] - y_[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
        c_[i] = m[i] / 2.0;
        d_[i] = (m[i + 1] - m[i]) / (6.0 * h);
    }
}

std::size_t CubicSpline::interval_for(double t) const {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t idx = static_cast<std::size_t>(it - times_.begin());
    if (idx == 0) return 0;
    return std::min(idx - 1, times_.size() - 2);
}

double CubicSpline::eval(double t) const {
    const std::size_t i = interval_for(t);
    const double u = t - times_[i];
    return y_[i] + u * (b_[i] + u * (c_[i] + u * d_[i]));
}

double CubicSpline::deriv(double t) const {
    const std::size_t i = interval_for(t);
    const double u = t - times_[i];
    return b_[i] + u * (2.0 * c_[i] + u * 3.0 * d_[i]);
}

}  // namespace fleetcast
