#include "fleetcast/fleet_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "fleetcast/errors.hpp"
#include "fleetcast/rng.hpp"
#include "fleetcast/spline.hpp"
#include "fleetcast/threading.hpp"

namespace fleetcast {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInnerDt = 0.01;  // 100 Hz control loop
constexpr double kArenaMargin = 2.0;
constexpr double kSpawnMinDist = 1.0;

// Controller tuning. Warehouse AGV style: rotate in place at junctions, then
// drive nearly straight with small corrections, accelerating gently. That
// keeps per-second pose deltas close to the left-endpoint unicycle step even
// though the true dynamics run at 100 Hz.
constexpr double kAccelLimit = 0.03;     // m/s^2 command slew
constexpr double kOmegaSlew = 0.05;      // rad/s^2 command slew
constexpr double kAlignEnter = 0.35;     // rad: stop driving, rotate in place
constexpr double kAlignExit = 0.10;      // rad: resume driving
constexpr double kHeadingGain = 2.0;     // 1/s while rotating in place
constexpr double kTurnOmegaCap = 0.25;   // rad/s while rotating in place
constexpr double kDriveGain = 0.5;       // 1/s while driving
constexpr double kDriveOmegaCap = 0.08;  // rad/s while driving
constexpr double kArriveDist = 0.1;      // m
constexpr double kLateGrace = 3.0;       // s past target_time before skipping
constexpr double kBrakeAccel = 0.03;     // m/s^2 assumed when planning stops
constexpr double kCrawlSpeed = 0.06;     // m/s floor during final approach

double clamp_mag(double v, double m) { return std::clamp(v, -m, m); }

double slew(double cur, double des, double max_delta) {
    return cur + std::clamp(des - cur, -max_delta, max_delta);
}

// Turn-rate command that the slew limit can still bring to zero exactly when
// the heading error does: |w| <= sqrt(2 * slew * err) alongside the
// proportional term and the flat cap.
double turn_command(double err, double omega_max) {
    const double mag = std::min(
        {kHeadingGain * std::abs(err), std::sqrt(2.0 * kOmegaSlew * std::abs(err)),
         kTurnOmegaCap, omega_max});
    return err >= 0.0 ? mag : -mag;
}

struct CtrlState {
    std::size_t wp = 1;
    bool aligning = true;
    double v_cmd = 0.0;
    double w_cmd = 0.0;
};

void controller_step(const WaypointPlan& plan, const RobotState& r, double t,
                     const FleetScenario& sc, CtrlState& cs, double& v_des,
                     double& w_des) {
    if (sc.v_max == 0.0) {
        v_des = 0.0;
        w_des = 0.0;
        return;
    }
    const auto& wps = plan.waypoints;
    while (cs.wp + 1 < wps.size() &&
           (t > wps[cs.wp].target_time + kLateGrace ||
            std::hypot(wps[cs.wp].x - r.x, wps[cs.wp].y - r.y) < kArriveDist))
        ++cs.wp;
    const Waypoint& w = wps[cs.wp];
    const double dist = std::hypot(w.x - r.x, w.y - r.y);
    if (dist < kArriveDist) {
        v_des = 0.0;
        w_des = turn_command(wrap_angle(w.theta - r.theta), sc.omega_max);
        cs.aligning = true;
        return;
    }
    const double err = wrap_angle(std::atan2(w.y - r.y, w.x - r.x) - r.theta);
    if (cs.aligning) {
        if (std::abs(err) < kAlignExit) cs.aligning = false;
    } else if (std::abs(err) > kAlignEnter) {
        cs.aligning = true;
    }
    if (cs.aligning) {
        v_des = 0.0;
        w_des = turn_command(err, sc.omega_max);
        return;
    }
    const double t_rem = w.target_time - t;
    const double v_on_time = t_rem > 0.5 ? dist / t_rem : sc.v_max;
    const double brake_span = std::max(dist - kArriveDist * 0.5, 0.0);
    const double v_brake =
        std::max(std::sqrt(2.0 * kBrakeAccel * brake_span), kCrawlSpeed);
    v_des = std::clamp(std::min(v_on_time, v_brake), 0.0, sc.v_max);
    w_des = clamp_mag(kDriveGain * err, std::min(kDriveOmegaCap, sc.omega_max));
}

}  // namespace

void FleetScenario::validate() const {
    if (arena_width <= 2.0 * kArenaMargin || arena_height <= 2.0 * kArenaMargin)
        throw ConfigError("arena must exceed its 2 m wall margins");
    if (robot_count == 0) throw ConfigError("scenario needs at least one robot");
    if (duration_s < 1) throw ConfigError("scenario duration must be positive");
    if (sigma_v < 0.0 || sigma_omega < 0.0)
        throw ConfigError("noise levels must be non-negative");
    if (interaction_radius < 0.0)
        throw ConfigError("interaction radius must be non-negative");
    if (v_max < 0.0 || omega_max <= 0.0)
        throw ConfigError("kinematic limits must be positive (v_max may be 0)");
    if (stationary_fraction < 0.0 || stationary_fraction > 1.0)
        throw ConfigError("stationary_fraction must lie in [0, 1]");
}

void validate_plan(const WaypointPlan& plan, const FleetScenario& scenario) {
    if (plan.waypoints.size() < 2)
        throw ConfigError("waypoint plan needs at least two waypoints");
    const double hw = scenario.arena_width / 2.0;
    const double hh = scenario.arena_height / 2.0;
    double prev = -1.0;
    for (const Waypoint& w : plan.waypoints) {
        if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.theta) ||
            !std::isfinite(w.target_time))
            throw ConfigError("waypoint fields must be finite");
        if (std::abs(w.x) > hw || std::abs(w.y) > hh)
            throw ConfigError("waypoint outside arena bounds");
        if (!(w.target_time > prev))
            throw ConfigError("waypoint target times must increase strictly");
        prev = w.target_time;
    }
}

std::vector<WaypointPlan> generate_plans(const FleetScenario& scenario,
                                         std::uint64_t seed) {
    scenario.validate();
    const double hw = scenario.arena_width / 2.0 - kArenaMargin;
    const double hh = scenario.arena_height / 2.0 - kArenaMargin;
    Rng root(seed);

    Rng spawn_rng = root.fork(1);
    std::vector<double> sx(scenario.robot_count), sy(scenario.robot_count);
    for (std::size_t i = 0; i < scenario.robot_count; ++i) {
        bool placed = false;
        for (int tries = 0; tries < 100000 && !placed; ++tries) {
            const double x = spawn_rng.uniform(-hw, hw);
            const double y = spawn_rng.uniform(-hh, hh);
            placed = true;
            for (std::size_t j = 0; j < i && placed; ++j)
                placed = std::hypot(x - sx[j], y - sy[j]) >= kSpawnMinDist;
            if (placed) {
                sx[i] = x;
                sy[i] = y;
            }
        }
        if (!placed)
            throw ConfigError("arena too dense to spawn robots 1 m apart");
    }

    std::vector<WaypointPlan> plans(scenario.robot_count);
    for (std::size_t i = 0; i < scenario.robot_count; ++i) {
        Rng rng = root.fork(200 + i);
        WaypointPlan& plan = plans[i];
        const double theta0 = rng.uniform(-kPi, kPi);
        plan.waypoints.push_back({sx[i], sy[i], theta0, 0.0});
        if (rng.uniform() < scenario.stationary_fraction) {
            plan.waypoints.push_back(
                {sx[i], sy[i], theta0, static_cast<double>(scenario.duration_s) + 60.0});
            continue;
        }
        double px = sx[i], py = sy[i], t = 0.0;
        while (t < scenario.duration_s + 30.0) {
            const double leg_time = rng.uniform(45.0, 75.0);
            double budget = 0.8 * scenario.v_max * leg_time;
            double nx = px, ny = py;
            for (int tries = 0; tries < 200; ++tries) {
                const double ang = rng.uniform(-kPi, kPi);
                const double dist = rng.uniform(0.20, 0.55) * budget;
                nx = px + dist * std::cos(ang);
                ny = py + dist * std::sin(ang);
                if (std::abs(nx) <= hw && std::abs(ny) <= hh) break;
                if (tries % 50 == 49) budget *= 0.5;
                nx = px;
                ny = py;
            }
            const double leg_theta =
                (nx == px && ny == py) ? theta0 : std::atan2(ny - py, nx - px);
            t += leg_time;
            plan.waypoints.push_back({nx, ny, leg_theta, t});
            px = nx;
            py = ny;
        }
    }
    return plans;
}

RawLog simulate(const FleetScenario& scenario,
                const std::vector<WaypointPlan>& plans) {
    scenario.validate();
    if (plans.size() != scenario.robot_count)
        throw ShapeError("simulate: one plan per robot required");
    for (const WaypointPlan& p : plans) validate_plan(p, scenario);

    const std::size_t n = scenario.robot_count;
    const double hw = scenario.arena_width / 2.0;
    const double hh = scenario.arena_height / 2.0;
    Rng root(scenario.seed);

    Rng phase_rng = root.fork(3);
    std::vector<long> phase_step(n);
    for (std::size_t i = 0; i < n; ++i)
        phase_step[i] = 5 + phase_rng.uniform_int(0, 89);  // 0.05s .. 0.94s

    std::vector<Rng> noise;
    noise.reserve(n);
    for (std::size_t i = 0; i < n; ++i) noise.push_back(root.fork(100 + i));

    std::vector<RobotState> st(n);
    std::vector<CtrlState> cs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Waypoint& w0 = plans[i].waypoints.front();
        st[i].x = w0.x;
        st[i].y = w0.y;
        st[i].theta = w0.theta;
    }

    RawLog log;
    log.robots.resize(n);
    for (auto& r : log.robots) r.reserve(static_cast<std::size_t>(scenario.duration_s));

    std::vector<double> v_act(n), w_act(n);
    std::vector<char> slowed(n);
    const double r2 = scenario.interaction_radius * scenario.interaction_radius;
    const long total_steps = static_cast<long>(scenario.duration_s) * 100;

    for (long k = 0; k < total_steps; ++k) {
        const double t = static_cast<double>(k) * kInnerDt;
        for (std::size_t i = 0; i < n; ++i) {
            double v_des = 0.0, w_des = 0.0;
            controller_step(plans[i], st[i], t, scenario, cs[i], v_des, w_des);
            cs[i].v_cmd = slew(cs[i].v_cmd, v_des, kAccelLimit * kInnerDt);
            cs[i].w_cmd = slew(cs[i].w_cmd, w_des, kOmegaSlew * kInnerDt);
            v_act[i] = clamp_mag(cs[i].v_cmd + scenario.sigma_v * noise[i].normal(),
                                 scenario.v_max);
            w_act[i] = clamp_mag(cs[i].w_cmd + scenario.sigma_omega * noise[i].normal(),
                                 scenario.omega_max);
        }
        if (r2 > 0.0) {
            std::fill(slowed.begin(), slowed.end(), 0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double dx = st[i].x - st[j].x;
                    const double dy = st[i].y - st[j].y;
                    if (dx * dx + dy * dy < r2) slowed[i] = slowed[j] = 1;
                }
            for (std::size_t i = 0; i < n; ++i)
                if (slowed[i]) v_act[i] *= 0.5;
        }
        for (std::size_t i = 0; i < n; ++i) {
            st[i].v = v_act[i];
            st[i].omega = w_act[i];
            if (k % 100 == phase_step[i])
                log.robots[i].push_back(
                    {static_cast<double>(k / 100) + static_cast<double>(phase_step[i]) * 0.01,
                     st[i]});
            st[i].x = std::clamp(st[i].x + v_act[i] * std::cos(st[i].theta) * kInnerDt,
                                 -hw, hw);
            st[i].y = std::clamp(st[i].y + v_act[i] * std::sin(st[i].theta) * kInnerDt,
                                 -hh, hh);
            st[i].theta = wrap_angle(st[i].theta + w_act[i] * kInnerDt);
        }
    }
    return log;
}

Trajectory resample_1hz(const RawLog& log) {
    const std::size_t n = log.robots.size();
    if (n == 0) throw ConfigError("resample_1hz: empty log");
    const std::size_t dur = log.robots.front().size();
    if (dur < 4) throw ConfigError("resample_1hz: need at least 4 samples per robot");
    for (const auto& r : log.robots)
        if (r.size() != dur)
            throw ShapeError("resample_1hz: robots logged unequal sample counts");

    Trajectory out;
    out.dt = 1.0;
    out.states.resize(dur);
    for (auto& s : out.states) s.robots.resize(n);

    std::vector<double> ts(dur), xs(dur), ys(dur), ths(dur), vs(dur), ws(dur);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < dur; ++k) {
            const TimedState& s = log.robots[i][k];
            ts[k] = s.t;
            xs[k] = s.state.x;
            ys[k] = s.state.y;
            ths[k] = s.state.theta;
            vs[k] = s.state.v;
            ws[k] = s.state.omega;
        }
        for (std::size_t k = 1; k < dur; ++k)
            ths[k] = ths[k - 1] + wrap_angle(ths[k] - ths[k - 1]);
        const CubicSpline sx(ts, xs), sy(ts, ys), sth(ts, ths), sv(ts, vs),
            sw(ts, ws);
        for (std::size_t t = 0; t < dur; ++t) {
            RobotState& r = out.states[t].robots[i];
            const double tt = static_cast<double>(t);
            r.x = sx.eval(tt);
            r.y = sy.eval(tt);
            r.theta = wrap_angle(sth.eval(tt));
            r.v = sv.eval(tt);
            r.omega = sw.eval(tt);
        }
    }
    return out;
}

std::vector<SequenceRecord> chunk_sequences(const Trajectory& series,
                                            int chunk_len_s, int slide_s,
                                            std::size_t top_n,
                                            std::uint64_t scenario_seed) {
    series.validate();
    if (chunk_len_s < 2) throw ConfigError("chunk length must be at least 2 s");
    if (slide_s < 1) throw ConfigError("chunk slide must be positive");
    const std::size_t n = series.robot_count();
    const int total = static_cast<int>(series.horizon());
    if (top_n == 0 || top_n > n)
        throw ConfigError("top_n must lie in [1, robot_count]");
    if (total < chunk_len_s)
        throw ConfigError("series shorter than one chunk");

    std::vector<SequenceRecord> records;
    std::vector<std::pair<double, int>> rank(n);
    for (int off = 0; off + chunk_len_s <= total; off += slide_s) {
        for (std::size_t i = 0; i < n; ++i) {
            double len = 0.0;
            for (int t = off; t + 1 < off + chunk_len_s; ++t) {
                const RobotState& a = series.states[static_cast<std::size_t>(t)].robots[i];
                const RobotState& b =
                    series.states[static_cast<std::size_t>(t) + 1].robots[i];
                len += std::hypot(b.x - a.x, b.y - a.y);
            }
            rank[i] = {len, static_cast<int>(i)};
        }
        std::sort(rank.begin(), rank.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        SequenceRecord rec;
        rec.scenario_seed = scenario_seed;
        rec.chunk_offset_s = off;
        rec.robot_ids.resize(top_n);
        for (std::size_t j = 0; j < top_n; ++j) rec.robot_ids[j] = rank[j].second;
        std::sort(rec.robot_ids.begin(), rec.robot_ids.end());
        rec.traj.dt = series.dt;
        rec.traj.states.resize(static_cast<std::size_t>(chunk_len_s));
        for (int t = 0; t < chunk_len_s; ++t) {
            JointState& s = rec.traj.states[static_cast<std::size_t>(t)];
            s.robots.resize(top_n);
            for (std::size_t j = 0; j < top_n; ++j)
                s.robots[j] = series.states[static_cast<std::size_t>(off + t)]
                                  .robots[static_cast<std::size_t>(rec.robot_ids[j])];
        }
        records.push_back(std::move(rec));
    }
    return records;
}

Matrix controls_from_trajectory(const Trajectory& traj, std::size_t horizon) {
    traj.validate();
    if (horizon == 0 || horizon > traj.horizon())
        throw ShapeError("controls_from_trajectory: horizon exceeds trajectory");
    const std::size_t n = traj.robot_count();
    Matrix out(horizon, 2 * n);
    for (std::size_t t = 0; t < horizon; ++t)
        for (std::size_t i = 0; i < n; ++i) {
            out.at(t, 2 * i) = traj.states[t].robots[i].v;
            out.at(t, 2 * i + 1) = traj.states[t].robots[i].omega;
        }
    return out;
}

std::vector<SequenceRecord> build_dataset(const DatasetBuildConfig& cfg) {
    cfg.scenario.validate();
    if (cfg.scenario_count == 0) throw ConfigError("need at least one scenario");
    if (cfg.scenario.duration_s < cfg.chunk_len_s)
        throw ConfigError("scenario duration shorter than one chunk");

    std::vector<std::vector<SequenceRecord>> per(cfg.scenario_count);
    parallel_for(cfg.scenario_count, cfg.num_threads,
                 [&](std::size_t begin, std::size_t end, std::size_t) {
                     for (std::size_t s = begin; s < end; ++s) {
                         FleetScenario sc = cfg.scenario;
                         sc.seed = cfg.scenario.seed + s;
                         const auto plans = generate_plans(sc, sc.seed);
                         const Trajectory series = resample_1hz(simulate(sc, plans));
                         per[s] = chunk_sequences(series, cfg.chunk_len_s, cfg.slide_s,
                                                  cfg.top_n, sc.seed);
                     }
                 });
    std::vector<SequenceRecord> records;
    for (auto& group : per)
        for (auto& rec : group) records.push_back(std::move(rec));
    return records;
}

std::pair<std::vector<SequenceRecord>, std::vector<SequenceRecord>>
chronological_split(const std::vector<SequenceRecord>& records, double train_frac) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw ConfigError("train fraction must lie strictly inside (0, 1)");
    std::vector<std::uint64_t> seeds;
    for (const auto& r : records)
        if (std::find(seeds.begin(), seeds.end(), r.scenario_seed) == seeds.end())
            seeds.push_back(r.scenario_seed);

    std::pair<std::vector<SequenceRecord>, std::vector<SequenceRecord>> out;
    for (std::uint64_t seed : seeds) {
        std::vector<const SequenceRecord*> group;
        for (const auto& r : records)
            if (r.scenario_seed == seed) group.push_back(&r);
        std::stable_sort(group.begin(), group.end(),
                         [](const SequenceRecord* a, const SequenceRecord* b) {
                             return a->chunk_offset_s < b->chunk_offset_s;
                         });
        const std::size_t n_train = static_cast<std::size_t>(
            std::floor(train_frac * static_cast<double>(group.size()) + 1e-9));
        for (std::size_t i = 0; i < group.size(); ++i)
            (i < n_train ? out.first : out.second).push_back(*group[i]);
    }
    return out;
}

namespace {

using nlohmann::json;

json header_to_json(const DatasetHeader& h) {
    return json{{"format", "fleetcast-dataset"},
                {"version", h.version},
                {"robot_count", h.robot_count},
                {"horizon", h.horizon},
                {"channel_order", h.channel_order},
                {"scales",
                 {{"pos", h.scales.pos}, {"vel", h.scales.vel}, {"omega", h.scales.omega}}},
                {"record_count", h.record_count}};
}

DatasetHeader header_from_json(const json& j) {
    if (!j.is_object() || j.value("format", "") != "fleetcast-dataset")
        throw IoError("not a fleetcast dataset header");
    DatasetHeader h;
    h.version = j.at("version").get<int>();
    if (h.version != 1) throw IoError("unsupported dataset version");
    h.robot_count = j.at("robot_count").get<std::size_t>();
    h.horizon = j.at("horizon").get<std::size_t>();
    h.channel_order = j.at("channel_order").get<std::string>();
    h.scales.pos = j.at("scales").at("pos").get<double>();
    h.scales.vel = j.at("scales").at("vel").get<double>();
    h.scales.omega = j.at("scales").at("omega").get<double>();
    h.record_count = j.at("record_count").get<std::size_t>();
    return h;
}

void check_record_shapes(const Dataset& dataset) {
    for (const auto& r : dataset.records) {
        if (r.traj.horizon() != dataset.header.horizon ||
            r.robot_ids.size() != dataset.header.robot_count ||
            r.traj.robot_count() != dataset.header.robot_count)
            throw ShapeError("dataset record shape disagrees with header");
    }
}

constexpr char kBinaryMagic[4] = {'F', 'C', 'D', 'S'};

}  // namespace

void save_dataset_text(const std::string& path, const Dataset& dataset) {
    check_record_shapes(dataset);
    DatasetHeader h = dataset.header;
    h.record_count = dataset.records.size();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << header_to_json(h).dump() << '\n';
    for (const auto& r : dataset.records) {
        json rec{{"ids", r.robot_ids},
                 {"seed", r.scenario_seed},
                 {"offset", r.chunk_offset_s}};
        json states = json::array();
        for (const auto& s : r.traj.states)
            for (const auto& rb : s.robots) {
                states.push_back(rb.x);
                states.push_back(rb.y);
                states.push_back(rb.theta);
                states.push_back(rb.v);
                states.push_back(rb.omega);
            }
        rec["states"] = std::move(states);
        out << rec.dump() << '\n';
    }
    if (!out) throw IoError("short write to " + path);
}

void save_dataset_binary(const std::string& path, const Dataset& dataset) {
    check_record_shapes(dataset);
    DatasetHeader h = dataset.header;
    h.record_count = dataset.records.size();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const std::string header = header_to_json(h).dump();
    const std::uint32_t len = static_cast<std::uint32_t>(header.size());
    out.write(kBinaryMagic, 4);
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<double> flat;
    for (const auto& r : dataset.records) {
        const std::uint32_t n = static_cast<std::uint32_t>(r.robot_ids.size());
        const std::uint32_t t = static_cast<std::uint32_t>(r.traj.horizon());
        const std::uint64_t seed = r.scenario_seed;
        const std::int32_t off = r.chunk_offset_s;
        out.write(reinterpret_cast<const char*>(&n), 4);
        out.write(reinterpret_cast<const char*>(&t), 4);
        out.write(reinterpret_cast<const char*>(&seed), 8);
        out.write(reinterpret_cast<const char*>(&off), 4);
        std::vector<std::uint32_t> ids(r.robot_ids.begin(), r.robot_ids.end());
        out.write(reinterpret_cast<const char*>(ids.data()),
                  static_cast<std::streamsize>(ids.size() * 4));
        flat.clear();
        for (const auto& s : r.traj.states)
            for (const auto& rb : s.robots) {
                flat.push_back(rb.x);
                flat.push_back(rb.y);
                flat.push_back(rb.theta);
                flat.push_back(rb.v);
                flat.push_back(rb.omega);
            }
        out.write(reinterpret_cast<const char*>(flat.data()),
                  static_cast<std::streamsize>(flat.size() * sizeof(double)));
    }
    if (!out) throw IoError("short write to " + path);
}

namespace {

SequenceRecord record_from_flat(std::size_t n, std::size_t t,
                                std::vector<int> ids, std::uint64_t seed,
                                int offset, const std::vector<double>& flat) {
    SequenceRecord rec;
    rec.robot_ids = std::move(ids);
    rec.scenario_seed = seed;
    rec.chunk_offset_s = offset;
    rec.traj.dt = 1.0;
    rec.traj.states.resize(t);
    std::size_t k = 0;
    for (std::size_t ti = 0; ti < t; ++ti) {
        rec.traj.states[ti].robots.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            RobotState& rb = rec.traj.states[ti].robots[i];
            rb.x = flat[k++];
            rb.y = flat[k++];
            rb.theta = flat[k++];
            rb.v = flat[k++];
            rb.omega = flat[k++];
        }
    }
    return rec;
}

Dataset load_dataset_text(std::ifstream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("dataset file is empty");
    Dataset ds;
    json jh = json::parse(line, nullptr, false);
    if (jh.is_discarded()) throw IoError("dataset header is not valid JSON");
    ds.header = header_from_json(jh);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json jr = json::parse(line, nullptr, false);
        if (jr.is_discarded()) throw IoError("dataset record is not valid JSON");
        std::vector<int> ids = jr.at("ids").get<std::vector<int>>();
        const auto flat = jr.at("states").get<std::vector<double>>();
        if (flat.size() != ds.header.horizon * ds.header.robot_count * 5)
            throw IoError("dataset record has a truncated state block");
        ds.records.push_back(record_from_flat(
            ds.header.robot_count, ds.header.horizon, std::move(ids),
            jr.at("seed").get<std::uint64_t>(), jr.at("offset").get<int>(), flat));
    }
    if (ds.records.size() != ds.header.record_count)
        throw IoError("dataset record count disagrees with header");
    return ds;
}

Dataset load_dataset_binary(std::ifstream& in) {
    char magic[4];
    std::uint32_t len = 0;
    if (!in.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0)
        throw IoError("bad dataset magic");
    if (!in.read(reinterpret_cast<char*>(&len), 4))
        throw IoError("truncated dataset header");
    std::string header(len, '\0');
    if (!in.read(header.data(), len)) throw IoError("truncated dataset header");
    json jh = json::parse(header, nullptr, false);
    if (jh.is_discarded()) throw IoError("dataset header is not valid JSON");
    Dataset ds;
    ds.header = header_from_json(jh);
    for (std::size_t r = 0; r < ds.header.record_count; ++r) {
        std::uint32_t n = 0, t = 0;
        std::uint64_t seed = 0;
        std::int32_t off = 0;
        if (!in.read(reinterpret_cast<char*>(&n), 4) ||
            !in.read(reinterpret_cast<char*>(&t), 4) ||
            !in.read(reinterpret_cast<char*>(&seed), 8) ||
            !in.read(reinterpret_cast<char*>(&off), 4))
            throw IoError("truncated dataset record");
        if (n != ds.header.robot_count || t != ds.header.horizon)
            throw IoError("dataset record shape disagrees with header");
        std::vector<std::uint32_t> ids(n);
        if (!in.read(reinterpret_cast<char*>(ids.data()), n * 4))
            throw IoError("truncated dataset record");
        std::vector<double> flat(static_cast<std::size_t>(t) * n * 5);
        if (!in.read(reinterpret_cast<char*>(flat.data()),
                     static_cast<std::streamsize>(flat.size() * sizeof(double))))
            throw IoError("truncated dataset record");
        ds.records.push_back(record_from_flat(
            n, t, std::vector<int>(ids.begin(), ids.end()), seed, off, flat));
    }
    return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4] = {};
    in.read(magic, 4);
    in.clear();
    in.seekg(0);
    if (std::memcmp(magic, kBinaryMagic, 4) == 0) return load_dataset_binary(in);
    return load_dataset_text(in);
}

}  // namespace fleetcast
