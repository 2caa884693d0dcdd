#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fleetcast/autoencoder.hpp"
#include "fleetcast/cde.hpp"
#include "fleetcast/fleet_sim.hpp"
#include "fleetcast/params.hpp"

namespace fleetcast {

/// The full forecaster: frozen autoencoder around a latent CDE whose control
/// path is the time channel plus cumulative reference velocities (D_C = 2N+1).
struct ModelSpec {
    AeSpec ae;
    VectorFieldSpec field;
    int substeps_per_second = 4;

    std::size_t robot_count() const { return ae.robot_count; }
    std::size_t latent_dim() const { return ae.latent_dim; }
    std::size_t control_dim() const { return 2 * ae.robot_count + 1; }

    static ModelSpec make(std::size_t robot_count, std::size_t latent_dim,
                          int ae_hidden, const std::vector<int>& field_hidden,
                          int substeps_per_second = 4, NormScales scales = {});
    void validate() const;
};

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& text);

/// Adds the four parameter segments: "encoder", "decoder" (AE, seeded from
/// ae_seed), "field" (MLP) and "field_scale" (single learned scalar, starts
/// at 0.1 so early latent velocities stay small).
void add_model_segments(ParamStore& store, const ModelSpec& spec,
                        std::uint64_t ae_seed, std::uint64_t field_seed);

/// Marks encoder and decoder non-trainable (the post-pretraining regime).
void freeze_ae(ParamStore& store);

/// Builds C(t) for one sequence. controls is (T, 2N) reference velocities at
/// integer seconds; when controls_enabled is false the velocity channels are
/// zeroed and only the time channel drives the dynamics (the neural-ODE
/// ablation).
ControlPath make_control_path(const ModelSpec& spec, const Matrix& controls,
                              bool controls_enabled = true);

struct Forecast {
    Trajectory traj;  // decoded states, t = 0..horizon_s
    Matrix channels;  // (horizon_s + 1, 6N) raw decoder outputs, row 0 = AE(x0)
};

/// Encode the start state, integrate the CDE to horizon_s seconds, decode at
/// every integer second. controls must cover at least horizon_s rows.
Forecast forecast(const ModelSpec& spec, const ParamStore& store,
                  const JointState& start, const Matrix& controls,
                  std::size_t horizon_s, bool controls_enabled = true);

/// Analytical open-loop baseline: RK4 integration of the unicycle kinematics
/// with (v, omega) read from the spline through the 1 Hz reference controls.
/// Substep count is independent of the CDE's (the ODE is cheap, so the
/// default resolves circular arcs to well under 1e-6 m over 10 s).
Trajectory unicycle_baseline(const JointState& start, const Matrix& controls,
                             std::size_t horizon_s, int substeps_per_second = 10);
Trajectory unicycle_baseline(const SequenceRecord& rec, std::size_t horizon_s,
                             int substeps_per_second = 10);

}  // namespace fleetcast
