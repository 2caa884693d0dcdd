#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fleetcast/errors.hpp"

namespace fleetcast {

enum class Activation { Linear, Tanh, ReLU };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Shape of a fully connected network: node counts per layer plus the
/// activation applied to hidden layers and to the output layer.
struct MlpSpec {
    std::vector<int> layer_widths;
    Activation hidden_activation = Activation::Tanh;
    Activation output_activation = Activation::Linear;

    int input_dim() const { return layer_widths.front(); }
    int output_dim() const { return layer_widths.back(); }
    /// Number of weight layers.
    int depth() const { return static_cast<int>(layer_widths.size()) - 1; }
    std::size_t param_count() const;
    void validate() const;
    bool operator==(const MlpSpec&) const = default;
};

/// Recorded post-activations of one or more forward evaluations of a single
/// MlpSpec. Each record holds a_0 (the input) through a_L (the output),
/// which is everything the reverse pass needs: tanh' and relu' are both
/// recoverable from post-activation values.
class Tape {
public:
    Tape() = default;
    explicit Tape(const MlpSpec& spec);

    const MlpSpec& spec() const { return spec_; }
    std::size_t record_count() const { return count_; }
    std::size_t record_size() const { return record_size_; }
    bool empty() const { return count_ == 0; }
    void clear() { count_ = 0; }
    void reserve_records(std::size_t n) { arena_.reserve(n * record_size_); }

    std::span<double> push_record();
    std::span<const double> record(std::size_t idx) const;

private:
    MlpSpec spec_;
    std::size_t record_size_ = 0;
    std::size_t count_ = 0;
    std::vector<double> arena_;
};

/// Forward pass. params is the packed (W, b) per layer; output length must
/// equal spec.output_dim(). When tape is non-null a record is appended.
void mlp_forward(const MlpSpec& spec, std::span<const double> params,
                 std::span<const double> input, std::span<double> output,
                 Tape* tape = nullptr);

/// Reverse pass over one taped record. Parameter gradients are accumulated
/// (+=) into param_grads; the gradient w.r.t. the record's input is
/// accumulated into input_grad unless it is empty.
void mlp_backward(const MlpSpec& spec, std::span<const double> params,
                  const Tape& tape, std::size_t record_idx,
                  std::span<const double> upstream_grad,
                  std::span<double> input_grad, std::span<double> param_grads);

/// Weights ~ Normal(0, 1/fan_in), biases zero, deterministic per seed.
std::vector<double> init_mlp_params(const MlpSpec& spec, std::uint64_t seed);

}  // namespace fleetcast
