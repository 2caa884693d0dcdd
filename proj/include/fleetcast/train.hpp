#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fleetcast/model.hpp"

namespace fleetcast {

struct TrainConfig {
    int batch_size = 64;
    int epochs = 20;
    double lr_max = 3e-4;
    double lr_min = 3e-7;
    LossWeights weights;  // (1, 10, 10)
    int horizon_s = 60;
    bool controls_enabled = true;
    bool physics_enabled = true;
    std::uint64_t seed = 1;
    double split_fraction = 0.8;
    int num_threads = 1;
    bool verbose = false;

    // Resume support: this run covers schedule epochs [first_epoch,
    // first_epoch + epochs) of a cosine schedule spanning schedule_epochs
    // (0 = this run is the whole schedule). Epoch-indexed shuffles and the
    // LR curve then continue exactly where the interrupted run stopped.
    int first_epoch = 0;
    int schedule_epochs = 0;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    LossBreakdown train;
    LossBreakdown val;
    double val_ade = 0.0;  // m, at the training horizon
};

struct TrainLog {
    std::vector<EpochStats> epochs;
};

void save_train_log_csv(const std::string& path, const TrainLog& log,
                        bool append = false);

/// L_PIFL training of the vector field (and its output scale) with the AE
/// held frozen. Gradients flow through the decoder and the RK4 tape only;
/// encoder and decoder values are bit-identical before and after. Throws
/// DivergenceError naming epoch/batch/sequence if the latent state blows up.
TrainLog train_cde(const ModelSpec& spec, ParamStore& store,
                   const std::vector<SequenceRecord>& train_set,
                   const std::vector<SequenceRecord>& val_set,
                   const TrainConfig& cfg);

/// One sample's forward pass and loss: encode the record's first state,
/// integrate to min(horizon_s, T-1) seconds, decode, score L_PIFL against
/// the record's packed channels (physics terms dropped when physics_enabled
/// is false). When grad_out is non-empty it must have store.size() elements;
/// analytic gradients w.r.t. the "field", "field_scale", and "decoder"
/// segments are accumulated into it at their store offsets. The encoder is
/// outside every gradient path by construction.
LossBreakdown sample_loss_and_grad(const ModelSpec& spec, const ParamStore& store,
                                   const SequenceRecord& rec, int horizon_s,
                                   const LossWeights& weights,
                                   bool controls_enabled, bool physics_enabled,
                                   std::span<double> grad_out = {});

/// Mean L_PIFL components plus ADE at horizon_s over a record set, without
/// touching gradients.
struct EvalStats {
    LossBreakdown loss;
    double ade = 0.0;
    std::size_t records = 0;
};
EvalStats evaluate_model(const ModelSpec& spec, const ParamStore& store,
                         const std::vector<SequenceRecord>& records,
                         int horizon_s, const LossWeights& weights,
                         bool controls_enabled = true, int num_threads = 1);

/// Paired model-vs-baseline evaluation at several horizons plus the
/// per-sequence error histogram at the longest horizon.
struct EvalRow {
    int horizon_s = 0;
    double model_ade = 0.0;
    double baseline_ade = 0.0;  // NaN unless with_baseline
};
struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<double> per_sequence_ade;  // at the longest horizon, model
    std::vector<std::size_t> histogram;    // fixed-width bins of the above
    double histogram_bin_m = 0.25;
};
EvalReport evaluate(const ModelSpec& spec, const ParamStore& store,
                    const std::vector<SequenceRecord>& records,
                    const std::vector<int>& horizons = {5, 10, 60},
                    bool with_baseline = true, int num_threads = 1);

void save_eval_csv(const std::string& path, const EvalReport& report);
void save_histogram_csv(const std::string& path, const EvalReport& report);

struct CurriculumStage {
    int horizon_s = 0;
    int epochs = 0;
};

struct CurriculumSchedule {
    std::vector<CurriculumStage> stages;  // e.g. 120, 180, 240 after a 60 s base
    void validate() const;
};

struct StageResult {
    int horizon_s = 0;
    double zero_shot_ade = 0.0;   // incoming params evaluated at this horizon
    double fine_tuned_ade = 0.0;  // after this stage's training
    double baseline_ade = 0.0;
    bool diverged = false;  // stage aborted, previous params kept
    TrainLog log;
};

/// Sequential fine-tuning over increasing horizons, starting from the params
/// already in the store (the 60 s base model). Each stage snapshots the
/// incoming params and rolls back if training diverges.
std::vector<StageResult> curriculum_train(const ModelSpec& spec, ParamStore& store,
                                          const std::vector<SequenceRecord>& train_set,
                                          const std::vector<SequenceRecord>& val_set,
                                          const CurriculumSchedule& schedule,
                                          const TrainConfig& base_cfg);

struct RobotGrouping {
    std::vector<std::vector<int>> groups;  // ids ascending within each group
    Matrix centroids;                      // (groups, 2)
};

/// Capacity-constrained k-means over initial positions: Lloyd iterations
/// seeded by farthest-point init from the fleet centroid, then a global
/// greedy assignment pass capping every group at group_size. Deterministic,
/// and independent of robot input order except between exactly tied
/// distances (broken by lower id).
RobotGrouping cluster_robots(const JointState& initial, std::size_t group_size = 10);

/// Runs the group-size model independently per group and reassembles the
/// full-fleet forecast in original robot order. The combined output
/// restricted to a group is that group's standalone forecast, bit for bit,
/// because it is produced by the same code path on the same slice.
Forecast scaled_inference(const ModelSpec& spec, const ParamStore& store,
                          const SequenceRecord& seq, const RobotGrouping& grouping,
                          std::size_t horizon_s);

/// Slices a record to the robots of one group (ids ascending), preserving
/// seed and offset so slices stay traceable to their source window.
SequenceRecord slice_record(const SequenceRecord& rec, const std::vector<int>& ids);

}  // namespace fleetcast
