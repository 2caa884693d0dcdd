#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "fleetcast/model.hpp"
#include "fleetcast/rng.hpp"
#include "fleetcast/train.hpp"

using namespace fleetcast;

namespace {

Matrix constant_controls(std::size_t rows, std::vector<double> per_robot) {
    Matrix out(rows, per_robot.size());
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t c = 0; c < per_robot.size(); ++c)
            out.at(t, c) = per_robot[c];
    return out;
}

ModelSpec toy_spec(std::size_t robots = 2, std::size_t latent = 8) {
    return ModelSpec::make(robots, latent, 16, {16, 16});
}

/// Random small params plus a fat cos-channel bias on the decoder's output
/// layer, so unpacking an untrained model never hits a degenerate heading.
ParamStore toy_store(const ModelSpec& spec, std::uint64_t seed = 7) {
    ParamStore store;
    add_model_segments(store, spec, seed, seed + 1);
    auto dec = store.values("decoder");
    const std::size_t out_dim = spec.ae.channel_dim();
    for (std::size_t i = 0; i < spec.robot_count(); ++i)
        dec[dec.size() - out_dim + kChannelsPerRobot * i + 2] = 2.0;
    return store;
}

}  // namespace

TEST_CASE("unicycle baseline holds a fleet still under zero controls") {
    JointState start;
    start.robots = {{1.5, -2.0, 0.7, 0.0, 0.0}, {-4.0, 3.0, -2.1, 0.0, 0.0}};
    const Matrix controls = constant_controls(11, {0, 0, 0, 0});
    const Trajectory traj = unicycle_baseline(start, controls, 10);
    REQUIRE(traj.states.size() == 11);
    for (const JointState& s : traj.states)
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(s.robots[i].x == start.robots[i].x);
            CHECK(s.robots[i].y == start.robots[i].y);
            // theta passes through a rewrap, which costs an ulp or two
            CHECK(std::abs(s.robots[i].theta - start.robots[i].theta) < 1e-15);
            CHECK(s.robots[i].v == 0.0);
            CHECK(s.robots[i].omega == 0.0);
        }
}

TEST_CASE("unicycle baseline matches straight-line and circular closed forms") {
    const double w = std::numbers::pi / 10.0;
    JointState start;
    start.robots = {{0, 0, 0, 1.0, 0.0}, {0, 0, 0, 1.0, w}};
    const Matrix controls = constant_controls(11, {1.0, 0.0, 1.0, w});
    const Trajectory traj = unicycle_baseline(start, controls, 10);

    CHECK(std::abs(traj.states[10].robots[0].x - 10.0) < 1e-9);
    CHECK(std::abs(traj.states[10].robots[0].y) < 1e-9);
    CHECK(std::abs(traj.states[10].robots[0].theta) < 1e-9);

    const double r = 1.0 / w;
    for (std::size_t t = 1; t <= 10; ++t) {
        const double a = w * static_cast<double>(t);
        const RobotState& b = traj.states[t].robots[1];
        CHECK(std::abs(b.x - r * std::sin(a)) < 1e-6);
        CHECK(std::abs(b.y - r * (1.0 - std::cos(a))) < 1e-6);
        CHECK(std::abs(wrap_angle(b.theta - a)) < 1e-6);
        CHECK(b.v == 1.0);
        CHECK(b.omega == w);
    }
}

TEST_CASE("unicycle baseline integrates a linear speed ramp exactly") {
    JointState start;
    start.robots = {{0, 0, 0, 0.5, 0.0}};
    Matrix controls(11, 2);
    for (std::size_t t = 0; t < 11; ++t) {
        controls.at(t, 0) = 0.5 + 0.04 * static_cast<double>(t);
        controls.at(t, 1) = 0.0;
    }
    const Trajectory traj = unicycle_baseline(start, controls, 10);
    CHECK(std::abs(traj.states[10].robots[0].x - 7.0) < 1e-9);
    CHECK(std::abs(traj.states[10].robots[0].y) < 1e-12);
    CHECK(traj.states[10].robots[0].v == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("record-driven baseline reproduces a closed-form trajectory") {
    const double w = std::numbers::pi / 20.0;
    const double r = 1.0 / w;
    SequenceRecord rec;
    rec.traj.dt = 1.0;
    rec.traj.states.resize(31);
    for (std::size_t t = 0; t <= 30; ++t) {
        const double a = w * static_cast<double>(t);
        rec.traj.states[t].robots = {
            {r * std::sin(a), r * (1.0 - std::cos(a)), wrap_angle(a), 1.0, w}};
    }
    const Trajectory base = unicycle_baseline(rec, 30);
    CHECK(ade(rec.traj, base, 31) < 1e-6);

    CHECK_THROWS_AS(unicycle_baseline(rec, 31), ShapeError);
}

TEST_CASE("forecast emits the right shapes and echoes the encoded start") {
    const ModelSpec spec = toy_spec();
    const ParamStore store = toy_store(spec);
    Rng rng(11);
    JointState start;
    start.robots = {{1.0, 2.0, 0.3, 0.2, 0.01}, {-1.0, 0.5, -1.2, 0.4, -0.05}};
    Matrix controls(8, 4);
    for (std::size_t t = 0; t < 8; ++t)
        for (std::size_t c = 0; c < 4; ++c)
            controls.at(t, c) = rng.uniform(-0.3, 0.3);

    const Forecast f = forecast(spec, store, start, controls, 5);
    REQUIRE(f.channels.rows == 6);
    REQUIRE(f.channels.cols == 12);
    REQUIRE(f.traj.states.size() == 6);
    CHECK(f.traj.dt == 1.0);

    const std::vector<double> z0 = encode(spec.ae, store.values("encoder"), start);
    std::vector<double> row0(12);
    mlp_forward(spec.ae.decoder, store.values("decoder"), z0, row0, nullptr);
    for (std::size_t c = 0; c < 12; ++c) CHECK(f.channels.at(0, c) == row0[c]);

    const Forecast echo = forecast(spec, store, start, controls, 0);
    REQUIRE(echo.channels.rows == 1);
    for (std::size_t c = 0; c < 12; ++c)
        CHECK(echo.channels.at(0, c) == row0[c]);

    CHECK_THROWS_AS(forecast(spec, store, start, controls, 9), ShapeError);
}

TEST_CASE("a frozen control path leaves the latent state untouched for 240 s") {
    const ModelSpec spec = toy_spec();
    const ParamStore store = toy_store(spec, 21);
    JointState start;
    start.robots = {{3.0, -1.0, 1.1, 0.3, 0.02}, {-2.0, 4.0, -0.4, 0.1, -0.1}};
    const std::vector<double> z0 = encode(spec.ae, store.values("encoder"), start);

    Matrix knots(2, spec.control_dim());
    for (std::size_t c = 0; c < spec.control_dim(); ++c) {
        knots.at(0, c) = 0.5 + static_cast<double>(c);
        knots.at(1, c) = knots.at(0, c);
    }
    const ControlPath path({0.0, 240.0}, knots, spec.robot_count());

    IntegrationConfig cfg;
    cfg.substeps_per_second = spec.substeps_per_second;
    cfg.output_times.resize(240);
    for (int t = 0; t < 240; ++t) cfg.output_times[t] = t + 1;
    const Matrix zs = rk4_integrate(spec.field, store.values("field"),
                                    store.values("field_scale")[0], z0, path,
                                    cfg, nullptr);
    REQUIRE(zs.rows == 240);
    for (std::size_t t = 0; t < 240; ++t)
        for (std::size_t d = 0; d < spec.latent_dim(); ++d)
            CHECK(zs.at(t, d) == z0[d]);
}

TEST_CASE("model spec survives its json round trip") {
    ModelSpec spec = ModelSpec::make(10, 30, 96, {128, 128}, 4);
    spec.ae.scales.pos = 40.0;
    const std::string text = model_spec_to_json(spec);
    const ModelSpec back = model_spec_from_json(text);
    CHECK(back.robot_count() == 10);
    CHECK(back.latent_dim() == 30);
    CHECK(back.substeps_per_second == 4);
    CHECK(back.ae.scales.pos == 40.0);
    CHECK(back.field.mlp.layer_widths == spec.field.mlp.layer_widths);
    CHECK(back.ae.encoder.layer_widths == spec.ae.encoder.layer_widths);
    CHECK(back.ae.decoder.layer_widths == spec.ae.decoder.layer_widths);
    CHECK(model_spec_to_json(back) == text);

    CHECK_THROWS_AS(model_spec_from_json("{\"robot_count\": 0}"), ConfigError);
    CHECK_THROWS_AS(model_spec_from_json("not json"), ConfigError);
}

TEST_CASE("controls-off forecasts ignore the reference velocities") {
    const ModelSpec spec = toy_spec();
    const ParamStore store = toy_store(spec, 33);
    JointState start;
    start.robots = {{0.5, 0.1, 0.2, 0.3, 0.0}, {-0.5, -0.1, 1.2, 0.2, 0.05}};
    Rng rng(5);
    Matrix a(7, 4), b(7, 4);
    for (std::size_t t = 0; t < 7; ++t)
        for (std::size_t c = 0; c < 4; ++c) {
            a.at(t, c) = rng.uniform(-0.4, 0.4);
            b.at(t, c) = rng.uniform(-0.4, 0.4);
        }
    const Forecast fa = forecast(spec, store, start, a, 6, false);
    const Forecast fb = forecast(spec, store, start, b, 6, false);
    const Forecast on = forecast(spec, store, start, a, 6, true);
    REQUIRE(fa.channels.rows == fb.channels.rows);
    double off_gap = 0.0, on_gap = 0.0;
    for (std::size_t t = 0; t < fa.channels.rows; ++t)
        for (std::size_t c = 0; c < fa.channels.cols; ++c) {
            off_gap = std::max(off_gap,
                               std::abs(fa.channels.at(t, c) - fb.channels.at(t, c)));
            on_gap = std::max(on_gap,
                              std::abs(fa.channels.at(t, c) - on.channels.at(t, c)));
        }
    CHECK(off_gap == 0.0);
    CHECK(on_gap > 0.0);
}

TEST_CASE("robot clustering splits well separated blobs cleanly") {
    Rng rng(91);
    JointState fleet;
    for (int b = 0; b < 10; ++b) {
        const double cx = 100.0 * (b % 5);
        const double cy = 120.0 * (b / 5);
        for (int i = 0; i < 10; ++i)
            fleet.robots.push_back({cx + rng.uniform(-1.0, 1.0),
                                    cy + rng.uniform(-1.0, 1.0), 0.0, 0.0, 0.0});
    }
    const RobotGrouping g = cluster_robots(fleet, 10);
    REQUIRE(g.groups.size() == 10);
    REQUIRE(g.centroids.rows == 10);
    std::vector<bool> blob_seen(10, false);
    for (const std::vector<int>& group : g.groups) {
        REQUIRE(group.size() == 10);
        const int blob = group[0] / 10;
        CHECK(!blob_seen[blob]);
        blob_seen[blob] = true;
        for (std::size_t i = 0; i < group.size(); ++i)
            CHECK(group[i] == blob * 10 + static_cast<int>(i));
    }
}

TEST_CASE("robot clustering keeps exact capacities even when robots coincide") {
    JointState fleet;
    for (int i = 0; i < 100; ++i) fleet.robots.push_back({2.0, -3.0, 0, 0, 0});
    const RobotGrouping g = cluster_robots(fleet, 10);
    REQUIRE(g.groups.size() == 10);
    std::vector<bool> seen(100, false);
    for (const std::vector<int>& group : g.groups) {
        CHECK(group.size() == 10);
        for (int id : group) {
            CHECK(!seen[static_cast<std::size_t>(id)]);
            seen[static_cast<std::size_t>(id)] = true;
        }
    }

    JointState ragged;
    for (int i = 0; i < 17; ++i) ragged.robots.push_back({0, 0, 0, 0, 0});
    CHECK_THROWS_AS(cluster_robots(ragged, 10), ConfigError);
    CHECK_THROWS_AS(cluster_robots(fleet, 0), ConfigError);
}

TEST_CASE("robot clustering is a function of geometry, not input order") {
    Rng rng(17);
    JointState fleet;
    for (int i = 0; i < 40; ++i)
        fleet.robots.push_back({rng.uniform(-30.0, 30.0),
                                rng.uniform(-30.0, 30.0), 0, 0, 0});
    const RobotGrouping ref = cluster_robots(fleet, 10);

    std::vector<int> perm(40);
    for (int i = 0; i < 40; ++i) perm[i] = (i * 7 + 3) % 40;
    JointState shuffled;
    shuffled.robots.resize(40);
    for (int i = 0; i < 40; ++i)
        shuffled.robots[static_cast<std::size_t>(perm[i])] = fleet.robots[i];
    const RobotGrouping got = cluster_robots(shuffled, 10);

    auto canonical = [](const RobotGrouping& g, const std::vector<int>* map) {
        std::vector<std::vector<int>> sets;
        for (const std::vector<int>& group : g.groups) {
            std::vector<int> s;
            for (int id : group) s.push_back(map ? (*map)[id] : id);
            std::sort(s.begin(), s.end());
            sets.push_back(s);
        }
        std::sort(sets.begin(), sets.end());
        return sets;
    };
    std::vector<int> inv(40);
    for (int i = 0; i < 40; ++i) inv[perm[i]] = i;
    CHECK(canonical(ref, nullptr) == canonical(got, &inv));
}

TEST_CASE("grouped inference is bit-identical to per-group forecasts") {
    const ModelSpec spec = ModelSpec::make(10, 8, 24, {24});
    const ParamStore store = toy_store(spec, 55);

    Rng rng(3);
    SequenceRecord seq;
    seq.traj.dt = 1.0;
    seq.traj.states.resize(13);
    const std::size_t n = 20;
    for (std::size_t t = 0; t < 13; ++t) seq.traj.states[t].robots.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = rng.uniform(-20.0, 20.0), y = rng.uniform(-20.0, 20.0);
        double th = rng.uniform(-3.0, 3.0);
        for (std::size_t t = 0; t < 13; ++t) {
            const double v = rng.uniform(0.0, 0.5), w = rng.uniform(-0.2, 0.2);
            seq.traj.states[t].robots[i] = {x, y, wrap_angle(th), v, w};
            x += v * std::cos(th);
            y += v * std::sin(th);
            th += w;
        }
    }

    RobotGrouping grouping;
    grouping.groups = {{0, 2, 4, 6, 8, 10, 12, 14, 16, 18},
                       {1, 3, 5, 7, 9, 11, 13, 15, 17, 19}};
    const Forecast combined = scaled_inference(spec, store, seq, grouping, 12);
    REQUIRE(combined.channels.rows == 13);
    REQUIRE(combined.channels.cols == kChannelsPerRobot * n);

    for (const std::vector<int>& g : grouping.groups) {
        const SequenceRecord sub = slice_record(seq, g);
        const Matrix controls =
            controls_from_trajectory(sub.traj, sub.traj.horizon());
        const Forecast solo =
            forecast(spec, store, sub.traj.states.front(), controls, 12);
        for (std::size_t t = 0; t < 13; ++t)
            for (std::size_t i = 0; i < g.size(); ++i)
                for (std::size_t c = 0; c < kChannelsPerRobot; ++c) {
                    const auto gi = static_cast<std::size_t>(g[i]);
                    CHECK(combined.channels.at(t, kChannelsPerRobot * gi + c) ==
                          solo.channels.at(t, kChannelsPerRobot * i + c));
                }
    }

    SUBCASE("identical fleets in different groups forecast identically") {
        SequenceRecord twin = seq;
        for (std::size_t t = 0; t < 13; ++t)
            for (std::size_t i = 0; i < 10; ++i)
                twin.traj.states[t].robots[10 + i] = twin.traj.states[t].robots[i];
        RobotGrouping front_back;
        front_back.groups = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9},
                             {10, 11, 12, 13, 14, 15, 16, 17, 18, 19}};
        const Forecast f = scaled_inference(spec, store, twin, front_back, 12);
        for (std::size_t t = 0; t < 13; ++t)
            for (std::size_t c = 0; c < kChannelsPerRobot * 10; ++c)
                CHECK(f.channels.at(t, c) ==
                      f.channels.at(t, kChannelsPerRobot * 10 + c));
    }

    SUBCASE("grouping defects are rejected") {
        RobotGrouping bad;
        bad.groups = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
        CHECK_THROWS_AS(scaled_inference(spec, store, seq, bad, 12), ConfigError);
        bad.groups = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9},
                      {9, 11, 12, 13, 14, 15, 16, 17, 18, 19}};
        CHECK_THROWS_AS(scaled_inference(spec, store, seq, bad, 12), ConfigError);
        CHECK_THROWS_AS(scaled_inference(spec, store, seq, grouping, 13),
                        ConfigError);
    }
}

TEST_CASE("record slicing keeps ids and rejects bad index lists") {
    SequenceRecord rec;
    rec.robot_ids = {7, 8, 9, 10};
    rec.traj.dt = 1.0;
    rec.traj.states.resize(3);
    for (std::size_t t = 0; t < 3; ++t) {
        rec.traj.states[t].robots.resize(4);
        for (std::size_t i = 0; i < 4; ++i)
            rec.traj.states[t].robots[i] = {double(i), double(t), 0.1, 0.2, 0.0};
    }
    const SequenceRecord cut = slice_record(rec, {1, 3});
    REQUIRE(cut.traj.robot_count() == 2);
    CHECK(cut.robot_ids == std::vector<int>{8, 10});
    CHECK(cut.traj.states[2].robots[1].x == 3.0);
    CHECK(cut.traj.states[2].robots[1].y == 2.0);

    CHECK_THROWS_AS(slice_record(rec, {}), ConfigError);
    CHECK_THROWS_AS(slice_record(rec, {3, 1}), ConfigError);
    CHECK_THROWS_AS(slice_record(rec, {1, 4}), ConfigError);
}
