#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fleetcast/joint_state.hpp"
#include "fleetcast/matrix.hpp"
#include "fleetcast/params.hpp"

namespace fleetcast {

/// Mirror-image encoder/decoder pair over the joint fleet state. Three
/// hidden layers each (five layers counting input and output), ReLU inside,
/// linear heads.
struct AeSpec {
    std::size_t robot_count = 0;  // N
    std::size_t latent_dim = 0;   // D_L
    MlpSpec encoder;              // 6N -> hidden^3 -> D_L
    MlpSpec decoder;              // D_L -> hidden^3 -> 6N
    NormScales scales;

    static AeSpec make(std::size_t robot_count, std::size_t latent_dim,
                       int hidden_width, NormScales scales = {});
    std::size_t channel_dim() const { return kChannelsPerRobot * robot_count; }
    void validate() const;
};

/// Adds "encoder" and "decoder" segments initialized from seed.
void add_ae_segments(ParamStore& store, const AeSpec& spec, std::uint64_t seed,
                     bool trainable = true);

/// z = encoder(pack_channels(s)).
std::vector<double> encode(const AeSpec& spec, std::span<const double> enc_params,
                           const JointState& s);

/// decode = unpack_channels(decoder(z)); throws DegenerateHeadingError when a
/// heading pair decodes near zero.
JointState decode(const AeSpec& spec, std::span<const double> dec_params,
                  std::span<const double> z);

struct AePretrainConfig {
    int max_epochs = 60;
    int batch_size = 256;
    std::size_t samples_per_epoch = 16384;  // drawn deterministically per epoch
    double lr_start = 3e-4;
    double lr_end = 3e-7;
    double halt_pos_error_m = 0.1;
    std::uint64_t seed = 1;
    // Per-channel-group loss weights; position fidelity is the binding
    // requirement, so it gets the lion's share by default.
    double w_pos = 8.0;
    double w_heading = 2.0;
    double w_vel = 1.0;
    double w_omega = 1.0;
    bool verbose = false;
};

struct AePretrainResult {
    double val_pos_error_m = 0.0;
    double val_heading_error_deg = 0.0;
    double val_vel_error = 0.0;    // m/s
    double val_omega_error = 0.0;  // rad/s
    int epochs_run = 0;
    bool reached_threshold = false;
};

/// Mean position / heading / velocity reconstruction errors (physical units)
/// of decode(encode(row)) over the given packed-channel rows.
AePretrainResult evaluate_reconstruction(const AeSpec& spec, const ParamStore& store,
                                         const Matrix& rows);

/// MSE pretraining of encoder+decoder on packed-channel rows. Halts early
/// once validation position error drops under halt_pos_error_m; otherwise
/// runs the full epoch budget and reports reached_threshold = false so the
/// caller can surface a warning.
AePretrainResult pretrain_ae(ParamStore& store, const AeSpec& spec,
                             const Matrix& train_rows, const Matrix& val_rows,
                             const AePretrainConfig& cfg);

}  // namespace fleetcast
