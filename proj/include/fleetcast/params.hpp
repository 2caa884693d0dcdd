#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fleetcast/mlp.hpp"

namespace fleetcast {

/// One named block of parameters inside a ParamStore. MLP segments carry
/// their MlpSpec so checkpoints are self-describing; "raw" segments are bare
/// value arrays (e.g. a learned output scale).
struct SegmentInfo {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
    bool trainable = true;
    std::optional<MlpSpec> mlp;
};

/// Flat parameter vector with named segments, matching gradient buffer, and
/// Adam state. Frozen (non-trainable) segments keep their values through
/// adam_step even if gradients were accumulated into them.
class ParamStore {
public:
    std::size_t add_mlp_segment(const std::string& name, const MlpSpec& spec,
                                std::uint64_t init_seed, bool trainable = true);
    std::size_t add_raw_segment(const std::string& name,
                                std::span<const double> init_values,
                                bool trainable = true);

    bool has_segment(const std::string& name) const;
    const SegmentInfo& segment(const std::string& name) const;
    const std::vector<SegmentInfo>& segments() const { return segments_; }
    void set_trainable(const std::string& name, bool trainable);

    std::span<double> values(const std::string& name);
    std::span<const double> values(const std::string& name) const;
    std::span<double> grads(const std::string& name);

    std::span<double> all_values() { return values_; }
    std::span<const double> all_values() const { return values_; }
    std::span<double> all_grads() { return grads_; }

    void zero_grads();
    std::size_t size() const { return values_.size(); }
    std::int64_t step_count() const { return step_count_; }

    /// One Adam update with bias correction over every trainable segment,
    /// then zeroes all gradients. Throws DivergenceError if any trainable
    /// gradient is non-finite, naming the offending segment.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);

private:
    std::size_t add_segment(SegmentInfo info, std::span<const double> init);

    std::vector<SegmentInfo> segments_;
    std::vector<double> values_, grads_, adam_m_, adam_v_;
    std::int64_t step_count_ = 0;

    friend void save_checkpoint(const ParamStore&, const std::string&,
                                const std::string&);
    friend struct CheckpointLoader;
};

/// Cosine annealing from lr_start to lr_end over total_steps updates; the
/// schedule value for step >= total_steps stays at lr_end.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_start,
                 double lr_end);

/// Checkpoint files: magic "FCCK", little-endian u32 JSON header length, the
/// JSON header (format, segment table, caller extra), then every segment's
/// raw float64 little-endian values in table order. Bit-exact round trip.
void save_checkpoint(const ParamStore& store, const std::string& path,
                     const std::string& extra_json = "{}");

struct LoadedCheckpoint {
    ParamStore store;
    std::string extra_json;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace fleetcast
