#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fleetcast/control_path.hpp"
#include "fleetcast/errors.hpp"
#include "fleetcast/matrix.hpp"
#include "fleetcast/mlp.hpp"

namespace fleetcast {

/// Latent dynamics network: an MLP mapping z (D_L) to the flattened D_L x D_C
/// matrix dz/dC, with Tanh output squashed through a learned scalar scale so
/// single-step growth stays bounded over long horizons.
struct VectorFieldSpec {
    std::size_t latent_dim = 0;   // D_L
    std::size_t control_dim = 0;  // D_C
    MlpSpec mlp;

    static VectorFieldSpec make(std::size_t latent_dim, std::size_t control_dim,
                                const std::vector<int>& hidden_widths);
    void validate() const;
};

struct IntegrationConfig {
    int substeps_per_second = 4;  // h = 1 / substeps_per_second
    int t_start = 0;
    std::vector<int> output_times;  // ascending integer seconds >= t_start
    double norm_guard = 1e4;        // max |z_i| before aborting

    int t_end() const { return output_times.back(); }
    void validate() const;
};

/// Everything the reverse pass needs: one MLP record per stage evaluation
/// (k1..k4 per substep, in order) plus the control-path derivative each stage
/// saw. Bound to one (spec, config) pair per forward integration.
struct CdeTape {
    Tape mlp_tape;
    Matrix stage_derivs;  // (4 * total_substeps, D_C)
    IntegrationConfig cfg;
    std::size_t total_substeps = 0;
};

/// G(z) = scale * reshape(mlp(z), D_L x D_C), row-major.
void vector_field(const VectorFieldSpec& spec, std::span<const double> mlp_params,
                  double scale, std::span<const double> z, Matrix& out,
                  Tape* tape = nullptr);

/// dz/dt = G(z) * dC/dt(t).
void cde_rhs(const VectorFieldSpec& spec, std::span<const double> mlp_params,
             double scale, std::span<const double> z, const ControlPath& path,
             double t, std::span<double> out);

/// Classic fixed-step RK4 from z0 at cfg.t_start; returns one row of latent
/// state per requested output time. Stage times are formed as s + j*h from
/// each integer second s, never by accumulating t += h, so the same window
/// shifted by whole seconds reproduces bit-identically.
Matrix rk4_integrate(const VectorFieldSpec& spec, std::span<const double> mlp_params,
                     double scale, std::span<const double> z0,
                     const ControlPath& path, const IntegrationConfig& cfg,
                     CdeTape* tape = nullptr);

/// Reverse-mode sweep over a recorded integration: exact gradients of the
/// discrete RK4 map. upstream is (len(output_times), D_L); gradients are
/// accumulated (+=) into the three destinations.
void backprop_integration(const VectorFieldSpec& spec,
                          std::span<const double> mlp_params, double scale,
                          const CdeTape& tape, const Matrix& upstream,
                          std::span<double> z0_grad,
                          std::span<double> mlp_param_grads,
                          std::span<double> scale_grad);

/// Test-oriented integrator sharing the production step grid: rhs is any
/// callable (t, z, dz_out). Used to pin solver behavior on closed-form
/// systems independently of the learned field.
template <typename Rhs>
Matrix rk4_integrate_generic(std::span<const double> z0,
                             const IntegrationConfig& cfg, Rhs&& rhs) {
    cfg.validate();
    const std::size_t d = z0.size();
    const double h = 1.0 / cfg.substeps_per_second;
    Matrix out(cfg.output_times.size(), d);
    std::vector<double> z(z0.begin(), z0.end());
    std::vector<double> k1(d), k2(d), k3(d), k4(d), zs(d);

    std::size_t out_row = 0;
    auto emit_if_requested = [&](int second) {
        while (out_row < cfg.output_times.size() &&
               cfg.output_times[out_row] == second) {
            std::copy(z.begin(), z.end(), out.row(out_row).begin());
            ++out_row;
        }
    };
    auto guard = [&](std::size_t step) {
        for (double v : z)
            if (!std::isfinite(v) || std::abs(v) >= cfg.norm_guard)
                throw DivergenceError("latent state exceeded the norm guard", step);
    };

    guard(0);
    emit_if_requested(cfg.t_start);
    std::size_t step = 0;
    for (int s = cfg.t_start; s < cfg.t_end(); ++s) {
        for (int j = 0; j < cfg.substeps_per_second; ++j, ++step) {
            const double t = s + j * h;
            rhs(t, std::span<const double>(z), std::span<double>(k1));
            for (std::size_t i = 0; i < d; ++i) zs[i] = z[i] + 0.5 * h * k1[i];
            rhs(t + 0.5 * h, std::span<const double>(zs), std::span<double>(k2));
            for (std::size_t i = 0; i < d; ++i) zs[i] = z[i] + 0.5 * h * k2[i];
            rhs(t + 0.5 * h, std::span<const double>(zs), std::span<double>(k3));
            for (std::size_t i = 0; i < d; ++i) zs[i] = z[i] + h * k3[i];
            rhs(t + h, std::span<const double>(zs), std::span<double>(k4));
            for (std::size_t i = 0; i < d; ++i)
                z[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            guard(step + 1);
        }
        emit_if_requested(s + 1);
    }
    return out;
}

}  // namespace fleetcast
