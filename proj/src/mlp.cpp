#include "fleetcast/mlp.hpp"

#include <cmath>
#include <numeric>

#include "fleetcast/rng.hpp"

namespace fleetcast {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Tanh: return "tanh";
        case Activation::ReLU: return "relu";
    }
    throw ConfigError("unknown activation enum value");
}

Activation activation_from_name(const std::string& name) {
    if (name == "linear") return Activation::Linear;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::ReLU;
    throw ConfigError("unknown activation name: " + name);
}

std::size_t MlpSpec::param_count() const {
    validate();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
        n += static_cast<std::size_t>(layer_widths[l + 1]) * layer_widths[l];
        n += static_cast<std::size_t>(layer_widths[l + 1]);
    }
    return n;
}

void MlpSpec::validate() const {
    if (layer_widths.size() < 2)
        throw ConfigError("MlpSpec needs at least input and output widths");
    for (int w : layer_widths)
        if (w <= 0) throw ConfigError("MlpSpec layer widths must be positive");
}

Tape::Tape(const MlpSpec& spec) : spec_(spec) {
    spec_.validate();
    record_size_ = std::accumulate(spec_.layer_widths.begin(),
                                   spec_.layer_widths.end(), std::size_t{0});
}

std::span<double> Tape::push_record() {
    if (record_size_ == 0) throw ShapeError("Tape used before being bound to an MlpSpec");
    arena_.resize((count_ + 1) * record_size_);
    return {arena_.data() + count_++ * record_size_, record_size_};
}

std::span<const double> Tape::record(std::size_t idx) const {
    if (idx >= count_) throw ShapeError("tape record index out of range");
    return {arena_.data() + idx * record_size_, record_size_};
}

namespace {

inline void apply_activation(Activation act, double* v, int n) {
    switch (act) {
        case Activation::Linear:
            return;
        case Activation::Tanh:
            for (int i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
            return;
        case Activation::ReLU:
            for (int i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
            return;
    }
}

// d(act)/d(pre) expressed through the post-activation value.
inline double activation_grad(Activation act, double post) {
    switch (act) {
        case Activation::Linear: return 1.0;
        case Activation::Tanh: return 1.0 - post * post;
        case Activation::ReLU: return post > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

inline void affine(const double* w, const double* b, const double* x,
                   double* out, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const double* wr = w + static_cast<std::size_t>(r) * cols;
        double acc = b[r];
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
        out[r] = acc;
    }
}

}  // namespace

void mlp_forward(const MlpSpec& spec, std::span<const double> params,
                 std::span<const double> input, std::span<double> output,
                 Tape* tape) {
    spec.validate();
    if (params.size() != spec.param_count())
        throw ShapeError("mlp_forward: parameter span has wrong length");
    if (input.size() != static_cast<std::size_t>(spec.input_dim()))
        throw ShapeError("mlp_forward: input span has wrong length");
    if (output.size() != static_cast<std::size_t>(spec.output_dim()))
        throw ShapeError("mlp_forward: output span has wrong length");
    if (tape && tape->spec() != spec)
        throw ShapeError("mlp_forward: tape was built for a different MlpSpec");

    std::span<double> rec;
    std::vector<double> scratch;
    double* acts;
    if (tape) {
        rec = tape->push_record();
        acts = rec.data();
    } else {
        scratch.resize(std::accumulate(spec.layer_widths.begin(),
                                       spec.layer_widths.end(), std::size_t{0}));
        acts = scratch.data();
    }

    std::copy(input.begin(), input.end(), acts);
    const double* prev = acts;
    double* cur = acts + spec.layer_widths[0];
    std::size_t p = 0;
    const int depth = spec.depth();
    for (int l = 0; l < depth; ++l) {
        const int rows = spec.layer_widths[l + 1];
        const int cols = spec.layer_widths[l];
        const double* w = params.data() + p;
        const double* b = w + static_cast<std::size_t>(rows) * cols;
        affine(w, b, prev, cur, rows, cols);
        apply_activation(l + 1 == depth ? spec.output_activation
                                        : spec.hidden_activation,
                         cur, rows);
        p += static_cast<std::size_t>(rows) * cols + rows;
        prev = cur;
        cur += rows;
    }
    std::copy(prev, prev + spec.output_dim(), output.begin());
}

void mlp_backward(const MlpSpec& spec, std::span<const double> params,
                  const Tape& tape, std::size_t record_idx,
                  std::span<const double> upstream_grad,
                  std::span<double> input_grad, std::span<double> param_grads) {
    spec.validate();
    if (tape.spec() != spec)
        throw ShapeError("mlp_backward: tape was built for a different MlpSpec");
    if (params.size() != spec.param_count() || param_grads.size() != spec.param_count())
        throw ShapeError("mlp_backward: parameter span has wrong length");
    if (upstream_grad.size() != static_cast<std::size_t>(spec.output_dim()))
        throw ShapeError("mlp_backward: upstream gradient has wrong length");
    if (!input_grad.empty() &&
        input_grad.size() != static_cast<std::size_t>(spec.input_dim()))
        throw ShapeError("mlp_backward: input gradient has wrong length");

    const std::span<const double> rec = tape.record(record_idx);
    const int depth = spec.depth();

    // Offsets of each layer's post-activations in the record and of each
    // layer's (W, b) block in the parameter vector.
    std::vector<std::size_t> act_off(depth + 1), par_off(depth);
    act_off[0] = 0;
    for (int l = 0; l < depth; ++l) {
        act_off[l + 1] = act_off[l] + spec.layer_widths[l];
        par_off[l] = l == 0 ? 0
                            : par_off[l - 1] +
                                  static_cast<std::size_t>(spec.layer_widths[l]) *
                                      spec.layer_widths[l - 1] +
                                  spec.layer_widths[l];
    }

    std::vector<double> g(upstream_grad.begin(), upstream_grad.end());
    std::vector<double> g_next;
    for (int l = depth - 1; l >= 0; --l) {
        const int rows = spec.layer_widths[l + 1];
        const int cols = spec.layer_widths[l];
        const Activation act =
            l + 1 == depth ? spec.output_activation : spec.hidden_activation;
        const double* post = rec.data() + act_off[l + 1];
        const double* below = rec.data() + act_off[l];
        // dL/d(pre) in place.
        for (int r = 0; r < rows; ++r) g[r] *= activation_grad(act, post[r]);

        const double* w = params.data() + par_off[l];
        double* dw = param_grads.data() + par_off[l];
        double* db = dw + static_cast<std::size_t>(rows) * cols;
        g_next.assign(cols, 0.0);
        for (int r = 0; r < rows; ++r) {
            const double gr = g[r];
            if (gr == 0.0) continue;
            const double* wr = w + static_cast<std::size_t>(r) * cols;
            double* dwr = dw + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) {
                dwr[c] += gr * below[c];
                g_next[c] += gr * wr[c];
            }
            db[r] += gr;
        }
        g.swap(g_next);
    }
    if (!input_grad.empty())
        for (int c = 0; c < spec.input_dim(); ++c) input_grad[c] += g[c];
}

std::vector<double> init_mlp_params(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<double> params(spec.param_count(), 0.0);
    Rng rng(seed);
    std::size_t p = 0;
    for (int l = 0; l < spec.depth(); ++l) {
        const int rows = spec.layer_widths[l + 1];
        const int cols = spec.layer_widths[l];
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(cols));
        for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i)
            params[p + i] = rng.normal(0.0, std_dev);
        p += static_cast<std::size_t>(rows) * cols + rows;  // biases stay zero
    }
    return params;
}

}  // namespace fleetcast
