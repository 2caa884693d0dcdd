#include "fleetcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>

#include "fleetcast/rng.hpp"
#include "fleetcast/threading.hpp"

namespace fleetcast {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
    if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
    if (!(lr_max > 0.0) || !(lr_min > 0.0) || lr_min > lr_max)
        throw ConfigError("train: need lr_max >= lr_min > 0");
    weights.validate();
    if (horizon_s != 60 && horizon_s != 120 && horizon_s != 180 &&
        horizon_s != 240)
        throw ConfigError("train: horizon must be one of 60, 120, 180, 240 s");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw ConfigError("train: split_fraction must be inside (0, 1)");
    if (num_threads < 1) throw ConfigError("train: num_threads must be at least 1");
    if (first_epoch < 0) throw ConfigError("train: first_epoch must be >= 0");
    if (schedule_epochs < 0)
        throw ConfigError("train: schedule_epochs must be >= 0");
    if (schedule_epochs > 0 && first_epoch + epochs > schedule_epochs)
        throw ConfigError("train: run extends past the end of its schedule");
}

void CurriculumSchedule::validate() const {
    if (stages.empty()) throw ConfigError("curriculum: no stages");
    for (std::size_t k = 0; k < stages.size(); ++k) {
        if (stages[k].epochs < 1)
            throw ConfigError("curriculum: every stage needs at least one epoch");
        if (k > 0 && stages[k].horizon_s <= stages[k - 1].horizon_s)
            throw ConfigError("curriculum: horizons must rise strictly");
    }
}

namespace {

struct GradSpans {
    std::span<double> decoder, field, scale;
};

GradSpans grad_spans(const ParamStore& store, std::span<double> grad) {
    const SegmentInfo& dec = store.segment("decoder");
    const SegmentInfo& field = store.segment("field");
    const SegmentInfo& scale = store.segment("field_scale");
    return {grad.subspan(dec.offset, dec.length),
            grad.subspan(field.offset, field.length),
            grad.subspan(scale.offset, scale.length)};
}

Matrix packed_channels(const Trajectory& traj, const NormScales& scales,
                       std::size_t rows) {
    Matrix out(rows, kChannelsPerRobot * traj.robot_count());
    for (std::size_t t = 0; t < rows; ++t)
        pack_channels(traj.states[t], scales, out.row(t));
    return out;
}

/// Mean position error (m) over robots and t in {0..horizon_samples-1},
/// straight from channel matrices: immune to degenerate headings.
double ade_channels(const Matrix& truth, const Matrix& pred, double pos_scale,
                    std::size_t horizon_samples) {
    if (truth.cols != pred.cols || horizon_samples > truth.rows ||
        horizon_samples > pred.rows || horizon_samples == 0)
        throw ShapeError("ade_channels: shape mismatch");
    const std::size_t n = truth.cols / kChannelsPerRobot;
    double acc = 0.0;
    for (std::size_t t = 0; t < horizon_samples; ++t)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = kChannelsPerRobot * i;
            const double dx = (pred.at(t, c) - truth.at(t, c)) * pos_scale;
            const double dy = (pred.at(t, c + 1) - truth.at(t, c + 1)) * pos_scale;
            acc += std::hypot(dx, dy);
        }
    return acc / (static_cast<double>(n) * horizon_samples);
}

LossWeights effective_weights(const LossWeights& w, bool physics_enabled) {
    if (physics_enabled) return w;
    return {w.w_pred, 0.0, 0.0};
}

/// Shared forward (and optional backward) pass over one record. pred_out,
/// when non-null, receives the decoded channel matrix (T_H rows).
LossBreakdown run_sample(const ModelSpec& spec, const ParamStore& store,
                         const SequenceRecord& rec, int horizon_s,
                         const LossWeights& weights, bool controls_enabled,
                         bool physics_enabled, std::span<double> grad_out,
                         Matrix* pred_out) {
    if (horizon_s < 1) throw ConfigError("run_sample: horizon must be positive");
    rec.traj.validate();
    if (rec.traj.robot_count() != spec.robot_count())
        throw ShapeError("sequence robot count does not match the model");
    const std::size_t T = rec.traj.horizon();
    if (T < 2) throw ShapeError("sequence needs at least two samples");
    const std::size_t t_h =
        std::min<std::size_t>(static_cast<std::size_t>(horizon_s) + 1, T);
    const std::size_t steps = t_h - 1;
    const bool with_grad = !grad_out.empty();
    if (with_grad && grad_out.size() != store.size())
        throw ShapeError("gradient buffer must match the parameter store size");

    const Matrix truth = packed_channels(rec.traj, spec.ae.scales, t_h);
    const Matrix controls = controls_from_trajectory(rec.traj, t_h);
    const ControlPath path = make_control_path(spec, controls, controls_enabled);
    const std::vector<double> z0 =
        encode(spec.ae, store.values("encoder"), rec.traj.states.front());

    IntegrationConfig icfg;
    icfg.substeps_per_second = spec.substeps_per_second;
    icfg.output_times.resize(steps);
    for (std::size_t t = 0; t < steps; ++t)
        icfg.output_times[t] = static_cast<int>(t) + 1;

    CdeTape tape;
    const double scale = store.values("field_scale")[0];
    const Matrix zs = rk4_integrate(spec.field, store.values("field"), scale, z0,
                                    path, icfg, with_grad ? &tape : nullptr);

    Tape dec_tape(spec.ae.decoder);
    if (with_grad) dec_tape.reserve_records(t_h);
    Matrix pred(t_h, spec.ae.channel_dim());
    const auto dec_params = store.values("decoder");
    mlp_forward(spec.ae.decoder, dec_params, z0, pred.row(0),
                with_grad ? &dec_tape : nullptr);
    for (std::size_t t = 0; t < steps; ++t)
        mlp_forward(spec.ae.decoder, dec_params, zs.row(t), pred.row(t + 1),
                    with_grad ? &dec_tape : nullptr);

    const LossWeights w_eff = effective_weights(weights, physics_enabled);
    Matrix pred_grad;
    if (with_grad) pred_grad = Matrix(t_h, pred.cols);
    const LossBreakdown loss = pifl_loss_channels(
        truth, pred, spec.ae.scales, w_eff, 1.0, with_grad ? &pred_grad : nullptr);

    if (with_grad) {
        const GradSpans gs = grad_spans(store, grad_out);
        // Row 0 is decode(z0); its gradient reaches the decoder parameters
        // but dead-ends at the frozen encoder, so the input grad is skipped.
        mlp_backward(spec.ae.decoder, dec_params, dec_tape, 0, pred_grad.row(0),
                     {}, gs.decoder);
        Matrix upstream_z(steps, spec.latent_dim());
        for (std::size_t t = 0; t < steps; ++t)
            mlp_backward(spec.ae.decoder, dec_params, dec_tape, t + 1,
                         pred_grad.row(t + 1), upstream_z.row(t), gs.decoder);
        std::vector<double> z0_grad(spec.latent_dim(), 0.0);
        backprop_integration(spec.field, store.values("field"), scale, tape,
                             upstream_z, z0_grad, gs.field, gs.scale);
    }
    if (pred_out) *pred_out = std::move(pred);
    return loss;
}

void check_records(const ModelSpec& spec,
                   const std::vector<SequenceRecord>& records,
                   const char* what) {
    if (records.empty())
        throw ConfigError(std::string(what) + ": record set is empty");
    for (const SequenceRecord& r : records) {
        if (r.traj.robot_count() != spec.robot_count())
            throw ShapeError(std::string(what) +
                             ": sequence robot count does not match the model");
        if (r.traj.horizon() < 2)
            throw ShapeError(std::string(what) + ": sequence too short");
    }
}

std::string record_tag(const SequenceRecord& rec) {
    return "seed=" + std::to_string(rec.scenario_seed) +
           " offset=" + std::to_string(rec.chunk_offset_s) + "s";
}

}  // namespace

LossBreakdown sample_loss_and_grad(const ModelSpec& spec, const ParamStore& store,
                                   const SequenceRecord& rec, int horizon_s,
                                   const LossWeights& weights,
                                   bool controls_enabled, bool physics_enabled,
                                   std::span<double> grad_out) {
    spec.validate();
    return run_sample(spec, store, rec, horizon_s, weights, controls_enabled,
                      physics_enabled, grad_out, nullptr);
}

EvalStats evaluate_model(const ModelSpec& spec, const ParamStore& store,
                         const std::vector<SequenceRecord>& records,
                         int horizon_s, const LossWeights& weights,
                         bool controls_enabled, int num_threads) {
    spec.validate();
    check_records(spec, records, "evaluate_model");
    if (horizon_s < 1) throw ConfigError("evaluate_model: horizon must be positive");

    const std::size_t n = records.size();
    std::vector<LossBreakdown> losses(n);
    std::vector<double> ades(n);
    std::vector<std::exception_ptr> errors(n);
    parallel_for(n, num_threads, [&](std::size_t lo, std::size_t hi, int) {
        for (std::size_t k = lo; k < hi; ++k) {
            try {
                Matrix pred;
                losses[k] = run_sample(spec, store, records[k], horizon_s, weights,
                                       controls_enabled, true, {}, &pred);
                const std::size_t samples = std::min<std::size_t>(
                    static_cast<std::size_t>(horizon_s), records[k].traj.horizon());
                const Matrix truth =
                    packed_channels(records[k].traj, spec.ae.scales, samples);
                ades[k] = ade_channels(truth, pred, spec.ae.scales.pos, samples);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    });
    for (std::size_t k = 0; k < n; ++k)
        if (errors[k]) {
            try {
                std::rethrow_exception(errors[k]);
            } catch (const DivergenceError& d) {
                throw DivergenceError(std::string("evaluation diverged on sequence ") +
                                      record_tag(records[k]) + ": " + d.what());
            }
        }

    EvalStats out;
    out.records = n;
    for (std::size_t k = 0; k < n; ++k) {
        out.loss.total += losses[k].total;
        out.loss.pred += losses[k].pred;
        out.loss.uni += losses[k].uni;
        out.loss.acc += losses[k].acc;
        out.ade += ades[k];
    }
    const double inv = 1.0 / static_cast<double>(n);
    out.loss.total *= inv;
    out.loss.pred *= inv;
    out.loss.uni *= inv;
    out.loss.acc *= inv;
    out.ade *= inv;
    return out;
}

TrainLog train_cde(const ModelSpec& spec, ParamStore& store,
                   const std::vector<SequenceRecord>& train_set,
                   const std::vector<SequenceRecord>& val_set,
                   const TrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    check_records(spec, train_set, "train_cde");
    if (!store.has_segment("field") || !store.has_segment("field_scale") ||
        !store.has_segment("encoder") || !store.has_segment("decoder"))
        throw ConfigError("train_cde: store is missing model segments");
    freeze_ae(store);

    const std::size_t n = train_set.size();
    const std::size_t batch_cap = std::min<std::size_t>(
        n, static_cast<std::size_t>(cfg.batch_size));
    const std::int64_t batches =
        static_cast<std::int64_t>((n + batch_cap - 1) / batch_cap);
    const int sched_epochs =
        cfg.schedule_epochs > 0 ? cfg.schedule_epochs : cfg.epochs;
    const std::int64_t total_steps = sched_epochs * batches;

    std::vector<std::vector<double>> sample_grads(
        batch_cap, std::vector<double>(store.size(), 0.0));
    std::vector<LossBreakdown> sample_loss(batch_cap);
    std::vector<std::exception_ptr> sample_error(batch_cap);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    const Rng root(cfg.seed);
    TrainLog log;
    for (int e = cfg.first_epoch; e < cfg.first_epoch + cfg.epochs; ++e) {
        // The batch order must be a pure function of (seed, epoch) so a
        // resumed run sees the same shuffles as an uninterrupted one.
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = root.fork(3000 + static_cast<std::uint64_t>(e));
        for (std::size_t i = n; i > 1; --i) {
            const auto j = static_cast<std::size_t>(
                shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        EpochStats stats;
        stats.epoch = e;
        stats.lr = cosine_lr(static_cast<std::int64_t>(e) * batches, total_steps,
                             cfg.lr_max, cfg.lr_min);
        LossBreakdown train_sum;
        for (std::int64_t b = 0; b < batches; ++b) {
            const std::size_t lo = static_cast<std::size_t>(b) * batch_cap;
            const std::size_t hi = std::min(n, lo + batch_cap);
            const std::size_t bn = hi - lo;
            parallel_for(bn, cfg.num_threads,
                         [&](std::size_t klo, std::size_t khi, int) {
                for (std::size_t k = klo; k < khi; ++k) {
                    try {
                        std::fill(sample_grads[k].begin(), sample_grads[k].end(),
                                  0.0);
                        sample_loss[k] = run_sample(
                            spec, store, train_set[order[lo + k]], cfg.horizon_s,
                            cfg.weights, cfg.controls_enabled,
                            cfg.physics_enabled, sample_grads[k], nullptr);
                        sample_error[k] = nullptr;
                    } catch (...) {
                        sample_error[k] = std::current_exception();
                    }
                }
            });
            for (std::size_t k = 0; k < bn; ++k)
                if (sample_error[k]) {
                    const std::string where =
                        "epoch " + std::to_string(e) + " batch " +
                        std::to_string(b) + " sequence " +
                        record_tag(train_set[order[lo + k]]);
                    try {
                        std::rethrow_exception(sample_error[k]);
                    } catch (const DivergenceError& d) {
                        throw DivergenceError("cde training diverged at " + where +
                                              ": " + d.what());
                    }
                }

            const double inv_bn = 1.0 / static_cast<double>(bn);
            auto grads = store.all_grads();
            for (std::size_t k = 0; k < bn; ++k) {
                const std::vector<double>& g = sample_grads[k];
                for (std::size_t j = 0; j < g.size(); ++j)
                    grads[j] += g[j] * inv_bn;
                train_sum.total += sample_loss[k].total;
                train_sum.pred += sample_loss[k].pred;
                train_sum.uni += sample_loss[k].uni;
                train_sum.acc += sample_loss[k].acc;
            }
            const double lr =
                cosine_lr(static_cast<std::int64_t>(e) * batches + b, total_steps,
                          cfg.lr_max, cfg.lr_min);
            try {
                store.adam_step(lr);
            } catch (const DivergenceError& d) {
                throw DivergenceError("cde training diverged at epoch " +
                                      std::to_string(e) + " batch " +
                                      std::to_string(b) + ": " + d.what());
            }
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        stats.train.total = train_sum.total * inv_n;
        stats.train.pred = train_sum.pred * inv_n;
        stats.train.uni = train_sum.uni * inv_n;
        stats.train.acc = train_sum.acc * inv_n;

        if (!val_set.empty()) {
            const EvalStats vs =
                evaluate_model(spec, store, val_set, cfg.horizon_s, cfg.weights,
                               cfg.controls_enabled, cfg.num_threads);
            stats.val = vs.loss;
            stats.val_ade = vs.ade;
        }
        if (cfg.verbose)
            std::fprintf(stderr,
                         "[cde] epoch %d lr %.3e train %.4e (pred %.3e uni %.3e "
                         "acc %.3e) val %.4e ade %.3f m\n",
                         e, stats.lr, stats.train.total, stats.train.pred,
                         stats.train.uni, stats.train.acc, stats.val.total,
                         stats.val_ade);
        log.epochs.push_back(stats);
    }
    return log;
}

void save_train_log_csv(const std::string& path, const TrainLog& log,
                        bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw IoError("cannot open training log for writing: " + path);
    if (!append) {
        out << "# fleetcast train-log csv v1\n";
        out << "epoch,lr,train_total,train_pred,train_uni,train_acc,"
               "val_total,val_pred,val_uni,val_acc,val_ade_m\n";
    }
    char line[512];
    for (const EpochStats& s : log.epochs) {
        std::snprintf(line, sizeof line,
                      "%d,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e\n",
                      s.epoch, s.lr, s.train.total, s.train.pred, s.train.uni,
                      s.train.acc, s.val.total, s.val.pred, s.val.uni, s.val.acc,
                      s.val_ade);
        out << line;
    }
    if (!out) throw IoError("failed while writing training log: " + path);
}

EvalReport evaluate(const ModelSpec& spec, const ParamStore& store,
                    const std::vector<SequenceRecord>& records,
                    const std::vector<int>& horizons, bool with_baseline,
                    int num_threads) {
    spec.validate();
    check_records(spec, records, "evaluate");
    if (horizons.empty()) throw ConfigError("evaluate: no horizons given");
    int max_h = 0;
    for (int h : horizons) {
        if (h < 1) throw ConfigError("evaluate: horizons must be positive");
        max_h = std::max(max_h, h);
    }
    for (const SequenceRecord& r : records)
        if (static_cast<std::size_t>(max_h) > r.traj.horizon())
            throw ConfigError("evaluate: horizon " + std::to_string(max_h) +
                              " s exceeds a sequence of " +
                              std::to_string(r.traj.horizon()) + " samples");

    const std::size_t n = records.size();
    const std::size_t n_h = horizons.size();
    Matrix model_ade(n, n_h), base_ade(n, n_h);
    std::vector<double> seq_ade(n);
    std::vector<std::exception_ptr> errors(n);
    parallel_for(n, num_threads, [&](std::size_t lo, std::size_t hi, int) {
        for (std::size_t k = lo; k < hi; ++k) {
            try {
                const SequenceRecord& rec = records[k];
                const std::size_t T = rec.traj.horizon();
                const std::size_t steps =
                    std::min<std::size_t>(static_cast<std::size_t>(max_h), T - 1);
                Matrix pred;
                run_sample(spec, store, rec, static_cast<int>(steps),
                           LossWeights{}, true, true, {}, &pred);
                const Matrix truth =
                    packed_channels(rec.traj, spec.ae.scales, steps + 1);
                Trajectory base;
                if (with_baseline) base = unicycle_baseline(rec, steps);
                for (std::size_t hi_idx = 0; hi_idx < n_h; ++hi_idx) {
                    const std::size_t samples = std::min<std::size_t>(
                        static_cast<std::size_t>(horizons[hi_idx]), T);
                    model_ade.at(k, hi_idx) = ade_channels(
                        truth, pred, spec.ae.scales.pos, samples);
                    if (with_baseline) {
                        Trajectory truth_cut, base_cut;
                        truth_cut.states.assign(
                            rec.traj.states.begin(),
                            rec.traj.states.begin() +
                                static_cast<std::ptrdiff_t>(samples));
                        base_cut.states.assign(
                            base.states.begin(),
                            base.states.begin() +
                                static_cast<std::ptrdiff_t>(samples));
                        base_ade.at(k, hi_idx) = ade(truth_cut, base_cut, samples);
                    }
                }
                seq_ade[k] = model_ade.at(k, n_h - 1);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    });
    for (std::size_t k = 0; k < n; ++k)
        if (errors[k]) std::rethrow_exception(errors[k]);

    EvalReport report;
    report.rows.resize(n_h);
    for (std::size_t hi_idx = 0; hi_idx < n_h; ++hi_idx) {
        EvalRow& row = report.rows[hi_idx];
        row.horizon_s = horizons[hi_idx];
        double m = 0.0, b = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            m += model_ade.at(k, hi_idx);
            b += base_ade.at(k, hi_idx);
        }
        row.model_ade = m / static_cast<double>(n);
        row.baseline_ade = with_baseline
                               ? b / static_cast<double>(n)
                               : std::numeric_limits<double>::quiet_NaN();
    }
    report.per_sequence_ade = seq_ade;
    report.histogram = error_histogram(seq_ade, report.histogram_bin_m);
    return report;
}

void save_eval_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open evaluation report for writing: " + path);
    out << "# fleetcast eval csv v1\n";
    out << "horizon_s,model_ade_m,baseline_ade_m\n";
    char line[160];
    for (const EvalRow& row : report.rows) {
        if (std::isnan(row.baseline_ade))
            std::snprintf(line, sizeof line, "%d,%.6f,\n", row.horizon_s,
                          row.model_ade);
        else
            std::snprintf(line, sizeof line, "%d,%.6f,%.6f\n", row.horizon_s,
                          row.model_ade, row.baseline_ade);
        out << line;
    }
    if (!out) throw IoError("failed while writing evaluation report: " + path);
}

void save_histogram_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open histogram for writing: " + path);
    out << "# fleetcast histogram csv v1\n";
    out << "bin_lo_m,bin_hi_m,count\n";
    char line[120];
    for (std::size_t b = 0; b < report.histogram.size(); ++b) {
        std::snprintf(line, sizeof line, "%.3f,%.3f,%zu\n",
                      report.histogram_bin_m * static_cast<double>(b),
                      report.histogram_bin_m * static_cast<double>(b + 1),
                      report.histogram[b]);
        out << line;
    }
    if (!out) throw IoError("failed while writing histogram: " + path);
}

namespace {

double mean_baseline_ade(const std::vector<SequenceRecord>& records,
                         int horizon_s, int num_threads) {
    const std::size_t n = records.size();
    std::vector<double> vals(n);
    parallel_for(n, num_threads, [&](std::size_t lo, std::size_t hi, int) {
        for (std::size_t k = lo; k < hi; ++k) {
            const SequenceRecord& rec = records[k];
            const std::size_t T = rec.traj.horizon();
            const std::size_t steps =
                std::min<std::size_t>(static_cast<std::size_t>(horizon_s), T - 1);
            const Trajectory base = unicycle_baseline(rec, steps);
            const std::size_t samples =
                std::min<std::size_t>(static_cast<std::size_t>(horizon_s), T);
            Trajectory truth_cut, base_cut;
            truth_cut.states.assign(
                rec.traj.states.begin(),
                rec.traj.states.begin() + static_cast<std::ptrdiff_t>(samples));
            base_cut.states.assign(
                base.states.begin(),
                base.states.begin() + static_cast<std::ptrdiff_t>(samples));
            vals[k] = ade(truth_cut, base_cut, samples);
        }
    });
    double acc = 0.0;
    for (double v : vals) acc += v;
    return acc / static_cast<double>(n);
}

}  // namespace

std::vector<StageResult> curriculum_train(const ModelSpec& spec, ParamStore& store,
                                          const std::vector<SequenceRecord>& train_set,
                                          const std::vector<SequenceRecord>& val_set,
                                          const CurriculumSchedule& schedule,
                                          const TrainConfig& base_cfg) {
    schedule.validate();
    check_records(spec, val_set, "curriculum_train");
    std::vector<StageResult> results;
    for (const CurriculumStage& stage : schedule.stages) {
        TrainConfig cfg = base_cfg;
        cfg.horizon_s = stage.horizon_s;
        cfg.epochs = stage.epochs;
        cfg.first_epoch = 0;
        cfg.schedule_epochs = 0;
        cfg.validate();

        StageResult res;
        res.horizon_s = stage.horizon_s;
        res.zero_shot_ade =
            evaluate_model(spec, store, val_set, stage.horizon_s, cfg.weights,
                           cfg.controls_enabled, cfg.num_threads)
                .ade;
        res.baseline_ade =
            mean_baseline_ade(val_set, stage.horizon_s, cfg.num_threads);

        const ParamStore snapshot = store;
        try {
            res.log = train_cde(spec, store, train_set, val_set, cfg);
            res.fine_tuned_ade =
                evaluate_model(spec, store, val_set, stage.horizon_s, cfg.weights,
                               cfg.controls_enabled, cfg.num_threads)
                    .ade;
        } catch (const DivergenceError&) {
            store = snapshot;
            res.diverged = true;
            res.fine_tuned_ade = res.zero_shot_ade;
        }
        results.push_back(std::move(res));
    }
    return results;
}

RobotGrouping cluster_robots(const JointState& initial, std::size_t group_size) {
    const std::size_t n = initial.size();
    if (group_size == 0) throw ConfigError("cluster_robots: group_size is zero");
    if (n == 0 || n % group_size != 0)
        throw ConfigError("cluster_robots: robot count " + std::to_string(n) +
                          " is not a multiple of group size " +
                          std::to_string(group_size));
    const std::size_t k = n / group_size;

    std::vector<double> px(n), py(n);
    for (std::size_t i = 0; i < n; ++i) {
        px[i] = initial.robots[i].x;
        py[i] = initial.robots[i].y;
    }

    // Farthest-point seeding from the robot nearest the fleet centroid keeps
    // the result a function of geometry alone, not of input order.
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += px[i];
        my += py[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    std::vector<double> cx, cy;
    auto nearest_to = [&](double qx, double qy) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double d = std::hypot(px[i] - qx, py[i] - qy);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    };
    const std::size_t first = nearest_to(mx, my);
    cx.push_back(px[first]);
    cy.push_back(py[first]);
    std::vector<double> min_d(n);
    while (cx.size() < k) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < cx.size(); ++c)
                d = std::min(d, std::hypot(px[i] - cx[c], py[i] - cy[c]));
            min_d[i] = d;
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        cx.push_back(px[far]);
        cy.push_back(py[far]);
    }

    std::vector<std::size_t> assign(n, 0);
    for (int round = 0; round < 100; ++round) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = std::hypot(px[i] - cx[c], py[i] - cy[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                moved = true;
            }
        }
        std::vector<double> sx(k, 0.0), sy(k, 0.0);
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sx[assign[i]] += px[i];
            sy[assign[i]] += py[i];
            ++cnt[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (cnt[c] > 0) {
                cx[c] = sx[c] / static_cast<double>(cnt[c]);
                cy[c] = sy[c] / static_cast<double>(cnt[c]);
            }
        if (!moved) break;
    }

    // Global greedy capacity pass: closest (robot, centroid) pairs claim
    // slots first; exact ties fall back to lower robot id, then lower group.
    struct Cand {
        double d;
        std::size_t robot, group;
    };
    std::vector<Cand> cands;
    cands.reserve(n * k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c)
            cands.push_back({std::hypot(px[i] - cx[c], py[i] - cy[c]), i, c});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.d != b.d) return a.d < b.d;
        if (a.robot != b.robot) return a.robot < b.robot;
        return a.group < b.group;
    });

    RobotGrouping out;
    out.groups.assign(k, {});
    std::vector<bool> taken(n, false);
    std::size_t placed = 0;
    for (const Cand& c : cands) {
        if (placed == n) break;
        if (taken[c.robot] || out.groups[c.group].size() >= group_size) continue;
        taken[c.robot] = true;
        out.groups[c.group].push_back(static_cast<int>(c.robot));
        ++placed;
    }
    out.centroids = Matrix(k, 2);
    for (std::size_t c = 0; c < k; ++c) {
        std::sort(out.groups[c].begin(), out.groups[c].end());
        double sx = 0.0, sy = 0.0;
        for (int id : out.groups[c]) {
            sx += px[static_cast<std::size_t>(id)];
            sy += py[static_cast<std::size_t>(id)];
        }
        out.centroids.at(c, 0) = sx / static_cast<double>(group_size);
        out.centroids.at(c, 1) = sy / static_cast<double>(group_size);
    }
    return out;
}

SequenceRecord slice_record(const SequenceRecord& rec, const std::vector<int>& ids) {
    const std::size_t n = rec.traj.robot_count();
    if (ids.empty()) throw ConfigError("slice_record: no robot indices");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= n)
            throw ConfigError("slice_record: robot index out of range");
        if (i > 0 && ids[i] <= ids[i - 1])
            throw ConfigError("slice_record: indices must rise strictly");
    }
    SequenceRecord out;
    out.scenario_seed = rec.scenario_seed;
    out.chunk_offset_s = rec.chunk_offset_s;
    out.robot_ids.reserve(ids.size());
    for (int id : ids)
        out.robot_ids.push_back(rec.robot_ids.empty()
                                    ? id
                                    : rec.robot_ids[static_cast<std::size_t>(id)]);
    out.traj.dt = rec.traj.dt;
    out.traj.states.resize(rec.traj.states.size());
    for (std::size_t t = 0; t < rec.traj.states.size(); ++t) {
        out.traj.states[t].robots.reserve(ids.size());
        for (int id : ids)
            out.traj.states[t].robots.push_back(
                rec.traj.states[t].robots[static_cast<std::size_t>(id)]);
    }
    return out;
}

Forecast scaled_inference(const ModelSpec& spec, const ParamStore& store,
                          const SequenceRecord& seq, const RobotGrouping& grouping,
                          std::size_t horizon_s) {
    spec.validate();
    seq.traj.validate();
    const std::size_t n = seq.traj.robot_count();
    if (grouping.groups.empty())
        throw ConfigError("scaled_inference: grouping is empty");
    std::vector<bool> seen(n, false);
    std::size_t covered = 0;
    for (const std::vector<int>& g : grouping.groups) {
        if (g.size() != spec.robot_count())
            throw ShapeError("scaled_inference: group size does not match the model");
        for (int id : g) {
            if (id < 0 || static_cast<std::size_t>(id) >= n)
                throw ConfigError("scaled_inference: robot index out of range");
            if (seen[static_cast<std::size_t>(id)])
                throw ConfigError("scaled_inference: robot assigned twice");
            seen[static_cast<std::size_t>(id)] = true;
            ++covered;
        }
    }
    if (covered != n)
        throw ConfigError("scaled_inference: grouping does not cover every robot");
    if (horizon_s + 1 > seq.traj.horizon())
        throw ConfigError("scaled_inference: horizon exceeds the sequence");

    Forecast out;
    out.channels = Matrix(horizon_s + 1, kChannelsPerRobot * n);
    out.traj.dt = 1.0;
    out.traj.states.resize(horizon_s + 1);
    for (std::size_t t = 0; t <= horizon_s; ++t)
        out.traj.states[t].robots.resize(n);

    for (const std::vector<int>& g : grouping.groups) {
        const SequenceRecord sub = slice_record(seq, g);
        const Matrix controls =
            controls_from_trajectory(sub.traj, sub.traj.horizon());
        const Forecast f = forecast(spec, store, sub.traj.states.front(),
                                    controls, horizon_s);
        for (std::size_t t = 0; t <= horizon_s; ++t)
            for (std::size_t i = 0; i < g.size(); ++i) {
                const auto gi = static_cast<std::size_t>(g[i]);
                for (std::size_t c = 0; c < kChannelsPerRobot; ++c)
                    out.channels.at(t, kChannelsPerRobot * gi + c) =
                        f.channels.at(t, kChannelsPerRobot * i + c);
                out.traj.states[t].robots[gi] = f.traj.states[t].robots[i];
            }
    }
    return out;
}

}  // namespace fleetcast
