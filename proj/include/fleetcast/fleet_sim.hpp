#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fleetcast/control_path.hpp"
#include "fleetcast/losses.hpp"

namespace fleetcast {

/// Arena of width x height meters centered on the origin, so the channel
/// normalization (divide by half-extent) is symmetric.
struct FleetScenario {
    double arena_width = 100.0;
    double arena_height = 60.0;
    std::size_t robot_count = 10;
    int duration_s = 600;
    std::uint64_t seed = 1;
    double sigma_v = 0.03;          // m/s, actuation noise per 10 ms step
    double sigma_omega = 0.03;      // rad/s
    double interaction_radius = 1.5;
    double v_max = 2.0;
    double omega_max = 1.5;
    double stationary_fraction = 0.0;  // parked robots (warehouse idle share)

    void validate() const;
};

struct Waypoint {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
    double target_time = 0.0;  // s from scenario start
};

struct WaypointPlan {
    std::vector<Waypoint> waypoints;
};

void validate_plan(const WaypointPlan& plan, const FleetScenario& scenario);

/// Random waypoint tours, first waypoint doubling as the spawn pose. Spawns
/// are rejection-sampled at least 1 m apart; every leg's required average
/// speed stays at or below 0.8 * v_max by construction. A stationary_fraction
/// share of robots get parked plans (coincident waypoints).
std::vector<WaypointPlan> generate_plans(const FleetScenario& scenario,
                                         std::uint64_t seed);

struct TimedState {
    double t = 0.0;  // s, irregular: one sample per second at a fixed phase
    RobotState state;
};

struct RawLog {
    std::vector<std::vector<TimedState>> robots;  // [robot][second]
};

/// 100 Hz closed-loop rollout. Each robot runs a proportional controller
/// (turn in place toward the next waypoint when badly misaligned, otherwise
/// drive at the on-time-arrival speed with small heading corrections), with
/// slew-limited commands, Gaussian actuation noise each inner step, mutual
/// 0.5x speed scaling inside interaction_radius, and wall clamping. States
/// are logged once per second at a per-robot random phase.
RawLog simulate(const FleetScenario& scenario,
                const std::vector<WaypointPlan>& plans);

/// Cubic spline fit per robot and dimension (heading unwrapped before
/// fitting, re-wrapped after), evaluated at integer seconds 0..duration-1.
Trajectory resample_1hz(const RawLog& log);

/// One training sequence: top_n most-mobile robots over a chunk window.
struct SequenceRecord {
    std::vector<int> robot_ids;  // ascending source indices
    Trajectory traj;             // (chunk_len, top_n) at 1 Hz
    std::uint64_t scenario_seed = 0;
    int chunk_offset_s = 0;
};

/// Overlapping windows at offsets 0, slide, 2*slide, ... Robots are ranked by
/// path length within each window (ties broken by lower id).
std::vector<SequenceRecord> chunk_sequences(const Trajectory& series,
                                            int chunk_len_s, int slide_s,
                                            std::size_t top_n,
                                            std::uint64_t scenario_seed = 0);

/// (v, omega) rows for t = 0..horizon-1, the rollout/CDE control layout.
Matrix controls_from_trajectory(const Trajectory& traj, std::size_t horizon);

struct DatasetBuildConfig {
    FleetScenario scenario;      // seed of scenario k is scenario.seed + k
    std::size_t scenario_count = 1;
    std::size_t top_n = 10;
    int chunk_len_s = 240;
    int slide_s = 10;
    int num_threads = 1;
};

/// Full pipeline over scenario_count scenarios (parallel across scenarios,
/// deterministic for any thread count): plans -> simulate -> resample ->
/// chunk. Records arrive grouped by scenario, ordered by chunk offset.
std::vector<SequenceRecord> build_dataset(const DatasetBuildConfig& cfg);

/// Per scenario, the chronologically first train_frac share of chunks goes to
/// train and the rest to validation.
std::pair<std::vector<SequenceRecord>, std::vector<SequenceRecord>>
chronological_split(const std::vector<SequenceRecord>& records,
                    double train_frac = 0.8);

struct DatasetHeader {
    int version = 1;
    std::size_t robot_count = 0;  // robots per record
    std::size_t horizon = 0;      // samples per record
    NormScales scales;
    std::string channel_order = "x,y,theta,v,omega";
    std::size_t record_count = 0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<SequenceRecord> records;
};

/// Newline-delimited JSON: a self-describing header line, then one record
/// per line with full-precision floats.
void save_dataset_text(const std::string& path, const Dataset& dataset);

/// Binary variant: "FCDS" magic, u32 little-endian header length, the same
/// JSON header, then per record ids as u32 and states as float64.
void save_dataset_binary(const std::string& path, const Dataset& dataset);

/// Reads either format, detected from the leading bytes.
Dataset load_dataset(const std::string& path);

}  // namespace fleetcast
