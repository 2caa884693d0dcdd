#include "fleetcast/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fleetcast/rng.hpp"

namespace fleetcast {

AeSpec AeSpec::make(std::size_t robot_count, std::size_t latent_dim,
                    int hidden_width, NormScales scales) {
    AeSpec spec;
    spec.robot_count = robot_count;
    spec.latent_dim = latent_dim;
    spec.scales = scales;
    const int io = static_cast<int>(kChannelsPerRobot * robot_count);
    const int h = hidden_width;
    spec.encoder.layer_widths = {io, h, h, h, static_cast<int>(latent_dim)};
    spec.encoder.hidden_activation = Activation::ReLU;
    spec.encoder.output_activation = Activation::Linear;
    spec.decoder.layer_widths = {static_cast<int>(latent_dim), h, h, h, io};
    spec.decoder.hidden_activation = Activation::ReLU;
    spec.decoder.output_activation = Activation::Linear;
    spec.validate();
    return spec;
}

void AeSpec::validate() const {
    if (robot_count == 0) throw ConfigError("autoencoder needs robot_count > 0");
    if (latent_dim == 0) throw ConfigError("autoencoder needs latent_dim > 0");
    encoder.validate();
    decoder.validate();
    const int io = static_cast<int>(channel_dim());
    if (encoder.input_dim() != io || decoder.output_dim() != io)
        throw ShapeError("autoencoder input/output width must be 6N");
    if (encoder.output_dim() != static_cast<int>(latent_dim) ||
        decoder.input_dim() != static_cast<int>(latent_dim))
        throw ShapeError("autoencoder latent width mismatch");
    if (!(scales.pos > 0.0 && scales.vel > 0.0 && scales.omega > 0.0))
        throw ConfigError("normalization scales must be positive");
}

void add_ae_segments(ParamStore& store, const AeSpec& spec, std::uint64_t seed,
                     bool trainable) {
    store.add_mlp_segment("encoder", spec.encoder, seed, trainable);
    store.add_mlp_segment("decoder", spec.decoder, seed ^ 0x9e3779b97f4a7c15ull,
                          trainable);
}

std::vector<double> encode(const AeSpec& spec, std::span<const double> enc_params,
                           const JointState& s) {
    if (s.size() != spec.robot_count)
        throw ShapeError("encode: robot count mismatch");
    std::vector<double> channels(spec.channel_dim());
    pack_channels(s, spec.scales, channels);
    std::vector<double> z(spec.latent_dim);
    mlp_forward(spec.encoder, enc_params, channels, z);
    if (!all_finite(z)) throw DivergenceError("encoder produced non-finite latent");
    return z;
}

JointState decode(const AeSpec& spec, std::span<const double> dec_params,
                  std::span<const double> z) {
    std::vector<double> channels(spec.channel_dim());
    mlp_forward(spec.decoder, dec_params, z, channels);
    if (!all_finite(channels))
        throw DivergenceError("decoder produced non-finite channels");
    return unpack_channels(channels, spec.scales);
}

namespace {

struct ReconErrors {
    double pos = 0.0, heading = 0.0, vel = 0.0, omega = 0.0;
};

// Physical-unit errors between a target packed row and its reconstruction.
ReconErrors row_errors(const AeSpec& spec, std::span<const double> want,
                       std::span<const double> got) {
    ReconErrors e;
    const std::size_t n = spec.robot_count;
    for (std::size_t i = 0; i < n; ++i) {
        const double* w = want.data() + kChannelsPerRobot * i;
        const double* g = got.data() + kChannelsPerRobot * i;
        e.pos += spec.scales.pos * std::hypot(g[0] - w[0], g[1] - w[1]);
        const double want_theta = std::atan2(w[3], w[2]);
        const double got_theta = std::atan2(g[3], g[2]);
        e.heading += std::abs(wrap_angle(got_theta - want_theta));
        e.vel += spec.scales.vel * std::abs(g[4] - w[4]);
        e.omega += spec.scales.omega * std::abs(g[5] - w[5]);
    }
    e.pos /= n;
    e.heading /= n;
    e.vel /= n;
    e.omega /= n;
    return e;
}

}  // namespace

AePretrainResult evaluate_reconstruction(const AeSpec& spec,
                                         const ParamStore& store,
                                         const Matrix& rows) {
    if (rows.rows == 0) throw ConfigError("evaluate_reconstruction: empty rows");
    if (rows.cols != spec.channel_dim())
        throw ShapeError("evaluate_reconstruction: rows must be 6N wide");
    const auto enc = store.values("encoder");
    const auto dec = store.values("decoder");
    std::vector<double> z(spec.latent_dim), out(spec.channel_dim());
    AePretrainResult r;
    for (std::size_t i = 0; i < rows.rows; ++i) {
        mlp_forward(spec.encoder, enc, rows.row(i), z);
        mlp_forward(spec.decoder, dec, z, out);
        const ReconErrors e = row_errors(spec, rows.row(i), out);
        r.val_pos_error_m += e.pos;
        r.val_heading_error_deg += e.heading;
        r.val_vel_error += e.vel;
        r.val_omega_error += e.omega;
    }
    r.val_pos_error_m /= rows.rows;
    r.val_heading_error_deg *= 180.0 / 3.14159265358979323846 / rows.rows;
    r.val_vel_error /= rows.rows;
    r.val_omega_error /= rows.rows;
    return r;
}

AePretrainResult pretrain_ae(ParamStore& store, const AeSpec& spec,
                             const Matrix& train_rows, const Matrix& val_rows,
                             const AePretrainConfig& cfg) {
    spec.validate();
    if (train_rows.rows == 0 || val_rows.rows == 0)
        throw ConfigError("pretrain_ae: train and validation rows required");
    if (train_rows.cols != spec.channel_dim() || val_rows.cols != spec.channel_dim())
        throw ShapeError("pretrain_ae: rows must be 6N wide");
    if (cfg.max_epochs < 1 || cfg.batch_size < 1 || cfg.samples_per_epoch < 1)
        throw ConfigError("pretrain_ae: epoch/batch sizes must be positive");
    if (!store.has_segment("encoder")) add_ae_segments(store, spec, cfg.seed);

    const std::size_t dim = spec.channel_dim();
    const std::size_t per_epoch = std::min(cfg.samples_per_epoch, train_rows.rows);
    const std::int64_t steps_per_epoch =
        static_cast<std::int64_t>((per_epoch + cfg.batch_size - 1) / cfg.batch_size);
    const std::int64_t total_steps = steps_per_epoch * cfg.max_epochs;

    // Channel weights: (x, y, cos, sin, v, omega) repeated per robot.
    std::vector<double> w(dim);
    for (std::size_t i = 0; i < spec.robot_count; ++i) {
        double* c = w.data() + kChannelsPerRobot * i;
        c[0] = cfg.w_pos;
        c[1] = cfg.w_pos;
        c[2] = cfg.w_heading;
        c[3] = cfg.w_heading;
        c[4] = cfg.w_vel;
        c[5] = cfg.w_omega;
    }

    std::vector<std::size_t> order(train_rows.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Tape enc_tape(spec.encoder), dec_tape(spec.decoder);
    std::vector<double> z(spec.latent_dim), out(dim), up(dim),
        zbar(spec.latent_dim);
    const Rng base(cfg.seed);

    AePretrainResult result;
    std::int64_t step = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng erng = base.fork(static_cast<std::uint64_t>(epoch) + 1000);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(erng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

        for (std::size_t start = 0; start < per_epoch;
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(per_epoch, start + static_cast<std::size_t>(cfg.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            for (std::size_t s = start; s < stop; ++s) {
                const auto x = train_rows.row(order[s]);
                enc_tape.clear();
                dec_tape.clear();
                mlp_forward(spec.encoder, store.values("encoder"), x, z, &enc_tape);
                mlp_forward(spec.decoder, store.values("decoder"), z, out, &dec_tape);
                for (std::size_t c = 0; c < dim; ++c)
                    up[c] = 2.0 * w[c] * (out[c] - x[c]) * inv_batch /
                            static_cast<double>(dim);
                std::fill(zbar.begin(), zbar.end(), 0.0);
                mlp_backward(spec.decoder, store.values("decoder"), dec_tape, 0, up,
                             zbar, store.grads("decoder"));
                mlp_backward(spec.encoder, store.values("encoder"), enc_tape, 0,
                             zbar, {}, store.grads("encoder"));
            }
            store.adam_step(cosine_lr(step, total_steps, cfg.lr_start, cfg.lr_end));
            ++step;
        }

        result = evaluate_reconstruction(spec, store, val_rows);
        result.epochs_run = epoch + 1;
        if (cfg.verbose)
            std::fprintf(stderr,
                         "[ae] epoch %3d  val pos %.4f m  heading %.2f deg  "
                         "vel %.4f  omega %.4f\n",
                         epoch + 1, result.val_pos_error_m,
                         result.val_heading_error_deg, result.val_vel_error,
                         result.val_omega_error);
        if (result.val_pos_error_m < cfg.halt_pos_error_m) {
            result.reached_threshold = true;
            break;
        }
    }
    return result;
}

}  // namespace fleetcast
