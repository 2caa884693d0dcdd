#include "fleetcast/cde.hpp"

#include <algorithm>

namespace fleetcast {

VectorFieldSpec VectorFieldSpec::make(std::size_t latent_dim,
                                      std::size_t control_dim,
                                      const std::vector<int>& hidden_widths) {
    VectorFieldSpec spec;
    spec.latent_dim = latent_dim;
    spec.control_dim = control_dim;
    spec.mlp.layer_widths.push_back(static_cast<int>(latent_dim));
    for (int w : hidden_widths) spec.mlp.layer_widths.push_back(w);
    spec.mlp.layer_widths.push_back(static_cast<int>(latent_dim * control_dim));
    spec.mlp.hidden_activation = Activation::Tanh;
    spec.mlp.output_activation = Activation::Tanh;
    spec.validate();
    return spec;
}

void VectorFieldSpec::validate() const {
    if (latent_dim == 0 || control_dim == 0)
        throw ConfigError("vector field dimensions must be positive");
    mlp.validate();
    if (mlp.input_dim() != static_cast<int>(latent_dim))
        throw ShapeError("vector field MLP input must be D_L");
    if (mlp.output_dim() != static_cast<int>(latent_dim * control_dim))
        throw ShapeError("vector field MLP output must be D_L * D_C");
}

void IntegrationConfig::validate() const {
    if (substeps_per_second < 1)
        throw ConfigError("substeps_per_second must be at least 1");
    if (output_times.empty()) throw ConfigError("output_times is empty");
    if (output_times.front() < t_start)
        throw ConfigError("output_times must not precede t_start");
    for (std::size_t i = 0; i + 1 < output_times.size(); ++i)
        if (output_times[i] >= output_times[i + 1])
            throw ConfigError("output_times must be strictly increasing");
    if (!(norm_guard > 0.0)) throw ConfigError("norm_guard must be positive");
}

void vector_field(const VectorFieldSpec& spec, std::span<const double> mlp_params,
                  double scale, std::span<const double> z, Matrix& out,
                  Tape* tape) {
    spec.validate();
    if (z.size() != spec.latent_dim)
        throw ShapeError("vector_field: latent state has wrong length");
    out = Matrix(spec.latent_dim, spec.control_dim);
    mlp_forward(spec.mlp, mlp_params, z, out.data, tape);
    for (double& v : out.data) v *= scale;
    if (!out.all_finite())
        throw DivergenceError("vector field produced non-finite output");
}

void cde_rhs(const VectorFieldSpec& spec, std::span<const double> mlp_params,
             double scale, std::span<const double> z, const ControlPath& path,
             double t, std::span<double> out) {
    if (out.size() != spec.latent_dim)
        throw ShapeError("cde_rhs: output has wrong length");
    spec.validate();
    if (z.size() != spec.latent_dim)
        throw ShapeError("cde_rhs: latent state has wrong length");
    // Same arithmetic order as the integrator's inner loop (scale applied
    // after the dot product) so both entry points agree bitwise.
    std::vector<double> flat(spec.latent_dim * spec.control_dim);
    mlp_forward(spec.mlp, mlp_params, z, flat);
    if (!all_finite(flat))
        throw DivergenceError("vector field produced non-finite output");
    std::vector<double> dc(spec.control_dim);
    path_deriv(path, t, dc);
    for (std::size_t i = 0; i < spec.latent_dim; ++i) {
        const double* row = flat.data() + i * spec.control_dim;
        double acc = 0.0;
        for (std::size_t j = 0; j < spec.control_dim; ++j) acc += row[j] * dc[j];
        out[i] = scale * acc;
    }
}

Matrix rk4_integrate(const VectorFieldSpec& spec, std::span<const double> mlp_params,
                     double scale, std::span<const double> z0,
                     const ControlPath& path, const IntegrationConfig& cfg,
                     CdeTape* tape) {
    spec.validate();
    cfg.validate();
    if (z0.size() != spec.latent_dim)
        throw ShapeError("rk4_integrate: z0 has wrong length");
    if (path.channels() != spec.control_dim)
        throw ShapeError("rk4_integrate: control path channel count != D_C");
    if (path.t_begin() > cfg.t_start || path.t_end() < cfg.t_end())
        throw ShapeError("rk4_integrate: control path does not span the horizon");

    const std::size_t d = spec.latent_dim;
    const std::size_t dc_dim = spec.control_dim;
    const std::size_t total_substeps = static_cast<std::size_t>(
        (cfg.t_end() - cfg.t_start) * cfg.substeps_per_second);

    std::size_t stage_counter = 0;
    if (tape) {
        tape->mlp_tape = Tape(spec.mlp);
        tape->mlp_tape.reserve_records(4 * total_substeps);
        tape->stage_derivs = Matrix(4 * total_substeps, dc_dim);
        tape->cfg = cfg;
        tape->total_substeps = total_substeps;
    }

    std::vector<double> flat(d * dc_dim);
    auto rhs = [&](double t, std::span<const double> z_in, std::span<double> k) {
        mlp_forward(spec.mlp, mlp_params, z_in, flat,
                    tape ? &tape->mlp_tape : nullptr);
        std::span<double> dc = tape ? tape->stage_derivs.row(stage_counter++)
                                    : std::span<double>();
        std::vector<double> local;
        if (!tape) {
            local.resize(dc_dim);
            dc = local;
        }
        path_deriv(path, t, dc);
        for (std::size_t i = 0; i < d; ++i) {
            const double* row = flat.data() + i * dc_dim;
            double acc = 0.0;
            for (std::size_t j = 0; j < dc_dim; ++j) acc += row[j] * dc[j];
            k[i] = scale * acc;
        }
    };
    return rk4_integrate_generic(z0, cfg, rhs);
}

void backprop_integration(const VectorFieldSpec& spec,
                          std::span<const double> mlp_params, double scale,
                          const CdeTape& tape, const Matrix& upstream,
                          std::span<double> z0_grad,
                          std::span<double> mlp_param_grads,
                          std::span<double> scale_grad) {
    spec.validate();
    const std::size_t d = spec.latent_dim;
    const std::size_t dc_dim = spec.control_dim;
    if (tape.mlp_tape.record_count() != 4 * tape.total_substeps)
        throw ShapeError("backprop_integration: tape record count mismatch");
    if (tape.mlp_tape.spec() != spec.mlp)
        throw ShapeError("backprop_integration: tape was built for another field");
    if (upstream.rows != tape.cfg.output_times.size() || upstream.cols != d)
        throw ShapeError("backprop_integration: upstream gradient shape mismatch");
    if (z0_grad.size() != d || scale_grad.size() != 1)
        throw ShapeError("backprop_integration: gradient span shape mismatch");
    if (mlp_param_grads.size() != spec.mlp.param_count())
        throw ShapeError("backprop_integration: param gradient span mismatch");

    const double h = 1.0 / tape.cfg.substeps_per_second;
    const std::size_t n_nodes = tape.total_substeps + 1;
    std::vector<std::ptrdiff_t> node_row(n_nodes, -1);
    for (std::size_t r = 0; r < tape.cfg.output_times.size(); ++r) {
        const std::size_t node =
            static_cast<std::size_t>(tape.cfg.output_times[r] - tape.cfg.t_start) *
            tape.cfg.substeps_per_second;
        node_row[node] = static_cast<std::ptrdiff_t>(r);
    }

    std::vector<double> gbar(d, 0.0), zbar(d), zs_bar(d);
    std::vector<double> kbar1(d), kbar2(d), kbar3(d), kbar4(d);
    std::vector<double> flat_up(d * dc_dim);

    // One stage of the chain rule: kbar -> gradients through G(z_s) * c'.
    auto stage_reverse = [&](const std::vector<double>& kbar,
                             std::size_t record_idx) {
        const auto rec = tape.mlp_tape.record(record_idx);
        const double* y = rec.data() + (rec.size() - d * dc_dim);
        const auto dc = tape.stage_derivs.row(record_idx);
        double s_acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double ki = kbar[i];
            double* up_row = flat_up.data() + i * dc_dim;
            const double* y_row = y + i * dc_dim;
            double dot = 0.0;
            for (std::size_t j = 0; j < dc_dim; ++j) {
                up_row[j] = scale * ki * dc[j];
                dot += y_row[j] * dc[j];
            }
            s_acc += ki * dot;
        }
        scale_grad[0] += s_acc;
        std::fill(zs_bar.begin(), zs_bar.end(), 0.0);
        mlp_backward(spec.mlp, mlp_params, tape.mlp_tape, record_idx, flat_up,
                     zs_bar, mlp_param_grads);
    };

    for (std::size_t n = tape.total_substeps; n >= 1; --n) {
        if (node_row[n] >= 0) {
            const auto row = upstream.row(static_cast<std::size_t>(node_row[n]));
            for (std::size_t i = 0; i < d; ++i) gbar[i] += row[i];
        }
        const std::size_t k = n - 1;  // substep being reversed
        for (std::size_t i = 0; i < d; ++i) {
            kbar1[i] = h / 6.0 * gbar[i];
            kbar2[i] = h / 3.0 * gbar[i];
            kbar3[i] = h / 3.0 * gbar[i];
            kbar4[i] = h / 6.0 * gbar[i];
        }
        zbar = gbar;
        stage_reverse(kbar4, 4 * k + 3);
        for (std::size_t i = 0; i < d; ++i) {
            zbar[i] += zs_bar[i];
            kbar3[i] += h * zs_bar[i];
        }
        stage_reverse(kbar3, 4 * k + 2);
        for (std::size_t i = 0; i < d; ++i) {
            zbar[i] += zs_bar[i];
            kbar2[i] += 0.5 * h * zs_bar[i];
        }
        stage_reverse(kbar2, 4 * k + 1);
        for (std::size_t i = 0; i < d; ++i) {
            zbar[i] += zs_bar[i];
            kbar1[i] += 0.5 * h * zs_bar[i];
        }
        stage_reverse(kbar1, 4 * k);
        for (std::size_t i = 0; i < d; ++i) gbar[i] = zbar[i] + zs_bar[i];
    }
    if (node_row[0] >= 0) {
        const auto row = upstream.row(static_cast<std::size_t>(node_row[0]));
        for (std::size_t i = 0; i < d; ++i) gbar[i] += row[i];
    }
    for (std::size_t i = 0; i < d; ++i) z0_grad[i] += gbar[i];
}

}  // namespace fleetcast
