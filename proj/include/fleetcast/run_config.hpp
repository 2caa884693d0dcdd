#pragma once

#include <string>
#include <vector>

#include "fleetcast/autoencoder.hpp"
#include "fleetcast/fleet_sim.hpp"
#include "fleetcast/model.hpp"
#include "fleetcast/train.hpp"

namespace fleetcast {

/// Model block of a run config. Robot count is not stated here: the model
/// always matches the dataset's per-record robot count (data.top_n).
struct ModelConfig {
    std::size_t latent_dim = 30;
    int ae_hidden = 128;
    std::vector<int> field_hidden = {128, 128, 128, 128};
    int substeps_per_second = 4;
    // Channel normalization. auto_scales derives pos from the arena
    // half-extent and vel/omega from the scenario's command limits.
    bool auto_scales = true;
    NormScales scales;
};

struct PathsConfig {
    std::string dataset = "out/dataset.fcds";
    std::string checkpoint_dir = "out/checkpoints";
    std::string report_dir = "out/reports";
};

/// Declarative description of a full run: one JSON document drives data
/// generation, both training stages, curriculum fine-tuning, evaluation, and
/// forecasting. Unknown keys are rejected; every field has the default shown
/// in this header; the resolved document is echoed into every output
/// directory so a run can be reproduced from its artifacts alone.
struct RunConfig {
    DatasetBuildConfig data;      // "scenario" block (+ chunking keys)
    ModelConfig model;            // "model" block
    TrainConfig training;         // "training" block
    AePretrainConfig ae;          // "training.ae" sub-block
    std::vector<CurriculumStage> curriculum;  // "training.curriculum"
    PathsConfig paths;            // "paths" block

    void validate() const;

    /// The model implied by this config (robot count = data.top_n).
    ModelSpec model_spec() const;

    /// Named presets. toy: minutes on one core, 2-robot records, D_L=8.
    /// desk: 10 robots, D_L=30, hidden 128, >= 2000 sequences. paper:
    /// desk data with the publication hyperparameters (hidden 512,
    /// batch 1600, 800 epochs).
    static RunConfig preset(const std::string& name);
};

/// Strict parse: unknown keys anywhere raise ConfigError naming the key and
/// its block. Absent keys keep their defaults.
RunConfig run_config_from_json(const std::string& text);

/// Full resolved echo, every field explicit.
std::string run_config_to_json(const RunConfig& cfg);

/// Reads a config file, or a preset when path is "toy", "desk" or "paper".
RunConfig load_run_config(const std::string& path_or_preset);

/// Writes the resolved config as <dir>/config.json (creating dir).
void echo_run_config(const RunConfig& cfg, const std::string& dir);

}  // namespace fleetcast
