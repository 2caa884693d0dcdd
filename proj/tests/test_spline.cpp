#include <doctest.h>

#include <cmath>
#include <vector>

#include "fleetcast/control_path.hpp"
#include "fleetcast/errors.hpp"
#include "fleetcast/rng.hpp"
#include "fleetcast/spline.hpp"

using namespace fleetcast;

namespace {

HermiteSpline random_spline(std::uint64_t seed, std::size_t knots,
                            std::size_t channels) {
    Rng rng(seed);
    std::vector<double> times(knots);
    double t = 0.0;
    for (std::size_t k = 0; k < knots; ++k) {
        times[k] = t;
        t += rng.uniform(0.4, 1.6);
    }
    Matrix vals(knots, channels);
    for (double& v : vals.data) v = rng.uniform(-2.0, 2.0);
    return HermiteSpline(std::move(times), std::move(vals));
}

}  // namespace

TEST_CASE("cumulative sum knots") {
    ControlSequence seq;
    seq.robot_count = 1;
    seq.values = Matrix(3, 2);
    seq.values.at(0, 0) = 1.0;
    seq.values.at(1, 0) = 1.0;
    seq.values.at(2, 0) = 1.0;
    Matrix knots = cumsum_path(seq, 1.0);
    REQUIRE(knots.rows == 4);
    REQUIRE(knots.cols == 3);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(knots.at(k, 0) == static_cast<double>(k));  // time channel
        CHECK(knots.at(k, 1) == static_cast<double>(k));  // v channel
        CHECK(knots.at(k, 2) == 0.0);                     // w channel
    }

    ControlSequence zero;
    zero.robot_count = 2;
    zero.values = Matrix(5, 4);
    Matrix zk = cumsum_path(zero, 1.0);
    for (std::size_t k = 0; k < zk.rows; ++k) {
        CHECK(zk.at(k, 0) == static_cast<double>(k));
        for (std::size_t j = 1; j < zk.cols; ++j) CHECK(zk.at(k, j) == 0.0);
    }

    ControlSequence alt;
    alt.robot_count = 1;
    alt.values = Matrix(3, 2);
    alt.values.at(0, 0) = 1.0;
    alt.values.at(1, 0) = -1.0;
    alt.values.at(2, 0) = 1.0;
    Matrix ak = cumsum_path(alt, 1.0);
    CHECK(ak.at(0, 1) == 0.0);
    CHECK(ak.at(1, 1) == 1.0);
    CHECK(ak.at(2, 1) == 0.0);
    CHECK(ak.at(3, 1) == 1.0);

    CHECK_THROWS_AS(cumsum_path(alt, 0.0), ConfigError);
}

TEST_CASE("control sequence validation enforces velocity limits") {
    ControlSequence seq;
    seq.robot_count = 1;
    seq.values = Matrix(2, 2);
    seq.values.at(0, 0) = 1.9;
    seq.values.at(1, 1) = -1.4;
    CHECK_NOTHROW(seq.validate(2.0, 1.5));
    seq.values.at(0, 0) = 2.1;
    CHECK_THROWS_AS(seq.validate(2.0, 1.5), ConfigError);
    seq.values.at(0, 0) = std::nan("");
    CHECK_THROWS_AS(seq.validate(2.0, 1.5), ConfigError);
}

TEST_CASE("spline rejects bad knot times") {
    Matrix vals(3, 1);
    CHECK_THROWS_AS(HermiteSpline({0.0, 1.0, 1.0}, vals), ConfigError);
    CHECK_THROWS_AS(HermiteSpline({0.0, 2.0, 1.0}, vals), ConfigError);
    Matrix one(1, 1);
    CHECK_THROWS_AS(HermiteSpline({0.0}, one), ConfigError);
    Matrix wrong(2, 1);
    CHECK_THROWS_AS(HermiteSpline({0.0, 1.0, 2.0}, wrong), ShapeError);
}

TEST_CASE("spline reproduces linear data exactly") {
    std::vector<double> times{0.0, 1.0, 2.5, 3.0, 5.0};
    Matrix vals(5, 2);
    for (std::size_t k = 0; k < 5; ++k) {
        vals.at(k, 0) = 2.0 * times[k] - 1.0;
        vals.at(k, 1) = -0.5 * times[k] + 3.0;
    }
    HermiteSpline s(times, vals);
    std::vector<double> out(2), d(2);
    for (int i = 0; i <= 500; ++i) {
        const double t = 5.0 * i / 500.0;
        s.eval(t, out);
        CHECK(std::abs(out[0] - (2.0 * t - 1.0)) < 1e-12);
        CHECK(std::abs(out[1] - (-0.5 * t + 3.0)) < 1e-12);
        s.deriv(t, d);
        CHECK(std::abs(d[0] - 2.0) < 1e-12);
        CHECK(std::abs(d[1] + 0.5) < 1e-12);
    }
}

TEST_CASE("two-knot unit ramp is the identity map") {
    Matrix vals(2, 1);
    vals.at(0, 0) = 0.0;
    vals.at(1, 0) = 1.0;
    HermiteSpline s({0.0, 1.0}, vals);
    CHECK(s.tangents().at(0, 0) == 1.0);
    CHECK(s.tangents().at(1, 0) == 1.0);
    std::vector<double> out(1);
    for (double t : {0.0, 0.125, 0.5, 0.75, 1.0}) {
        s.eval(t, out);
        CHECK(out[0] == t);
    }
}

TEST_CASE("spline interpolates knots and is C1 at interior knots") {
    HermiteSpline s = random_spline(404, 10, 3);
    std::vector<double> out(3), dl(3), dr(3);
    for (std::size_t k = 0; k < s.knot_count(); ++k) {
        s.eval(s.knot_times()[k], out);
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(out[j] - s.knot_values().at(k, j)) < 1e-12);
    }
    for (std::size_t k = 1; k + 1 < s.knot_count(); ++k) {
        const double tk = s.knot_times()[k];
        s.deriv(tk - 1e-12, dl);
        s.deriv(tk + 1e-12, dr);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(std::abs(dl[j] - dr[j]) < 1e-10);
            CHECK(std::abs(dl[j] - s.tangents().at(k, j)) < 1e-10);
        }
    }
}

TEST_CASE("spline derivative matches central finite differences") {
    HermiteSpline s = random_spline(808, 12, 2);
    Rng rng(3);
    std::vector<double> up(2), dn(2), d(2);
    const double eps = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const double t = rng.uniform(s.t_begin() + 2 * eps, s.t_end() - 2 * eps);
        s.eval(t + eps, up);
        s.eval(t - eps, dn);
        s.deriv(t, d);
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(std::abs(d[j] - (up[j] - dn[j]) / (2 * eps)) < 1e-6);
    }
}

TEST_CASE("spline clamps outside the knot span") {
    HermiteSpline s = random_spline(7, 5, 2);
    std::vector<double> out(2), d(2);
    CHECK(s.eval(s.t_end() + 3.0, out) == true);
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(out[j] == s.knot_values().at(4, j));
    CHECK(s.eval(s.t_begin() - 1.0, out) == true);
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(out[j] == s.knot_values().at(0, j));
    CHECK(s.eval(0.5 * (s.t_begin() + s.t_end()), out) == false);
    s.deriv(s.t_end() + 3.0, d);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == 0.0);
}

TEST_CASE("integrating the derivative recovers the endpoint difference") {
    HermiteSpline s = random_spline(2222, 8, 2);
    const double a = s.t_begin(), b = s.t_end();
    // Composite Simpson panels aligned with knot intervals: exact for cubics
    // up to rounding.
    std::vector<double> acc(2, 0.0), f0(2), f1(2), fm(2);
    for (std::size_t k = 0; k + 1 < s.knot_count(); ++k) {
        const double t0 = s.knot_times()[k], t1 = s.knot_times()[k + 1];
        const int panels = 8;
        const double w = (t1 - t0) / panels;
        for (int p = 0; p < panels; ++p) {
            const double lo = t0 + p * w, hi = lo + w;
            s.deriv(lo, f0);
            s.deriv(0.5 * (lo + hi), fm);
            s.deriv(hi, f1);
            for (std::size_t j = 0; j < 2; ++j)
                acc[j] += (w / 6.0) * (f0[j] + 4.0 * fm[j] + f1[j]);
        }
    }
    std::vector<double> va(2), vb(2);
    s.eval(a, va);
    s.eval(b, vb);
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(std::abs(acc[j] - (vb[j] - va[j])) < 1e-8);
}

TEST_CASE("control path time channel has unit slope and exact values") {
    ControlSequence seq;
    seq.robot_count = 2;
    seq.values = Matrix(6, 4);
    Rng rng(55);
    for (double& v : seq.values.data) v = rng.uniform(-1.0, 1.0);
    ControlPath path(seq);
    CHECK(path.channels() == 5);
    CHECK(path.t_end() == 6.0);
    std::vector<double> out(5), d(5);
    for (double t : {0.0, 0.25, 1.5, 3.75, 5.0, 6.0}) {
        path_eval(path, t, out);
        CHECK(out[0] == t);
        path_deriv(path, t, d);
        CHECK(d[0] == 1.0);
    }
}

TEST_CASE("disabled time channel and zero controls freeze the path") {
    ControlSequence seq;
    seq.robot_count = 1;
    seq.values = Matrix(4, 2);  // all zero
    ControlPath path(seq, 1.0, /*with_time_channel=*/false);
    std::vector<double> out(3), d(3);
    for (double t : {0.0, 0.3, 1.0, 2.7, 4.0}) {
        CHECK(path_eval(path, t, out) == false);
        path_deriv(path, t, d);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(out[j] == 0.0);
            CHECK(d[j] == 0.0);
        }
    }
}

TEST_CASE("control path reproduces cumulative knots at integer seconds") {
    ControlSequence seq;
    seq.robot_count = 1;
    seq.values = Matrix(5, 2);
    Rng rng(99);
    for (double& v : seq.values.data) v = rng.uniform(-2.0, 2.0);
    const Matrix knots = cumsum_path(seq, 1.0);
    ControlPath path(seq);
    std::vector<double> out(3);
    for (std::size_t k = 0; k < knots.rows; ++k) {
        path_eval(path, static_cast<double>(k), out);
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(out[j] - knots.at(k, j)) < 1e-12);
    }
}

TEST_CASE("scalar spline interpolates knots and stays C2 inside") {
    Rng rng(12021);
    std::vector<double> times, ys;
    double t = 0.0;
    for (int k = 0; k < 12; ++k) {
        times.push_back(t);
        ys.push_back(rng.uniform(-3.0, 3.0));
        t += rng.uniform(0.5, 1.5);
    }
    CubicSpline s(times, ys);
    for (std::size_t k = 0; k < times.size(); ++k)
        CHECK(std::abs(s.eval(times[k]) - ys[k]) < 1e-12);
    const double eps = 1e-6;
    for (std::size_t k = 1; k + 1 < times.size(); ++k) {
        const double tk = times[k];
        const double dl = s.deriv(tk - eps), dr = s.deriv(tk + eps);
        CHECK(std::abs(dl - dr) < 1e-4);  // O(eps * y'') for a C1 spline
        const double m_left = (s.deriv(tk) - s.deriv(tk - eps)) / eps;
        const double m_right = (s.deriv(tk + eps) - s.deriv(tk)) / eps;
        CHECK(std::abs(m_left - m_right) < 5e-4);  // a C1-only fit jumps O(1)
    }
    for (int trial = 0; trial < 50; ++trial) {
        const double u = rng.uniform(times.front() + 0.01, times.back() - 0.01);
        const double fd = (s.eval(u + eps) - s.eval(u - eps)) / (2 * eps);
        CHECK(std::abs(s.deriv(u) - fd) < 1e-6);
    }
}

TEST_CASE("scalar spline reproduces lines and cubics exactly") {
    std::vector<double> times{0.0, 0.7, 1.5, 2.2, 3.4, 4.0};
    std::vector<double> lin(times.size()), cub(times.size());
    auto f_lin = [](double t) { return 1.75 * t - 0.4; };
    auto f_cub = [](double t) {
        return 0.3 * t * t * t - 1.1 * t * t + 0.5 * t + 2.0;
    };
    for (std::size_t k = 0; k < times.size(); ++k) {
        lin[k] = f_lin(times[k]);
        cub[k] = f_cub(times[k]);
    }
    CubicSpline sl(times, lin), sc(times, cub);
    for (int i = -20; i <= 120; ++i) {
        const double t = 4.0 * i / 100.0;  // includes points beyond both ends
        CHECK(std::abs(sl.eval(t) - f_lin(t)) < 1e-10);
        CHECK(std::abs(sl.deriv(t) - 1.75) < 1e-10);
        CHECK(std::abs(sc.eval(t) - f_cub(t)) < 1e-9);
        const double dc = 0.9 * t * t - 2.2 * t + 0.5;
        CHECK(std::abs(sc.deriv(t) - dc) < 1e-9);
    }
}

TEST_CASE("scalar spline tracks a sine sampled at 1 Hz") {
    std::vector<double> times, ys;
    for (int k = 0; k < 30; ++k) {
        times.push_back(static_cast<double>(k));
        ys.push_back(std::sin(0.9 * k));
    }
    CubicSpline s(times, ys);
    double worst = 0.0, worst_interior = 0.0, worst_d = 0.0;
    for (int k = 1; k < 28; ++k) {
        const double t = k + 0.37;
        const double err = std::abs(s.eval(t) - std::sin(0.9 * t));
        worst = std::max(worst, err);
        if (k >= 2 && k < 26) worst_interior = std::max(worst_interior, err);
        worst_d =
            std::max(worst_d, std::abs(s.deriv(t) - 0.9 * std::cos(0.9 * t)));
    }
    CHECK(worst < 1e-2);
    CHECK(worst_interior < 2.5e-3);
    CHECK(worst_d < 1e-2);
}

TEST_CASE("scalar spline handles tiny inputs and rejects bad ones") {
    CubicSpline two({0.0, 2.0}, {1.0, 5.0});
    CHECK(std::abs(two.eval(0.5) - 2.0) < 1e-12);
    CHECK(std::abs(two.eval(3.0) - 7.0) < 1e-12);  // linear extension
    CHECK(std::abs(two.deriv(1.7) - 2.0) < 1e-12);

    // Three knots fall back to natural ends; the parabola through them is
    // not reproduced, but knots still interpolate and the result stays C1.
    CubicSpline three({0.0, 1.0, 2.0}, {0.0, 1.0, 4.0});
    CHECK(std::abs(three.eval(1.0) - 1.0) < 1e-12);
    CHECK(std::abs(three.deriv(1.0 - 1e-7) - three.deriv(1.0 + 1e-7)) < 1e-5);

    CHECK_THROWS_AS(CubicSpline({0.0}, {1.0}), ConfigError);
    CHECK_THROWS_AS(CubicSpline({0.0, 0.0}, {1.0, 2.0}), ConfigError);
    CHECK_THROWS_AS(CubicSpline({0.0, -1.0}, {1.0, 2.0}), ConfigError);
    CHECK_THROWS_AS(CubicSpline({0.0, 1.0}, {1.0}), ShapeError);
    const double bad = std::nan("");
    CHECK_THROWS_AS(CubicSpline({0.0, 1.0}, {bad, 2.0}), ConfigError);
}
