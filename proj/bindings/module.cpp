#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "fleetcast/plot.hpp"
#include "fleetcast/run_config.hpp"

namespace py = pybind11;
using namespace fleetcast;

namespace {

JointState state_from_array(const py::array_t<double>& rows) {
    const auto r = rows.unchecked<2>();
    if (r.shape(1) != 5)
        throw ShapeError("state array must be (N, 5): x, y, theta, v, omega");
    JointState s;
    s.robots.resize(static_cast<std::size_t>(r.shape(0)));
    for (py::ssize_t i = 0; i < r.shape(0); ++i) {
        RobotState& rs = s.robots[static_cast<std::size_t>(i)];
        rs.x = r(i, 0);
        rs.y = r(i, 1);
        rs.theta = r(i, 2);
        rs.v = r(i, 3);
        rs.omega = r(i, 4);
    }
    return s;
}

Matrix controls_from_array(const py::array_t<double>& rows) {
    const auto r = rows.unchecked<2>();
    Matrix m(static_cast<std::size_t>(r.shape(0)),
             static_cast<std::size_t>(r.shape(1)));
    for (py::ssize_t i = 0; i < r.shape(0); ++i)
        for (py::ssize_t j = 0; j < r.shape(1); ++j)
            m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                r(i, j);
    return m;
}

py::array_t<double> trajectory_to_array(const Trajectory& traj) {
    const std::size_t T = traj.states.size();
    const std::size_t N = traj.robot_count();
    py::array_t<double> out({T, N, static_cast<std::size_t>(5)});
    auto w = out.mutable_unchecked<3>();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < N; ++i) {
            const RobotState& r = traj.states[t].robots[i];
            w(t, i, 0) = r.x;
            w(t, i, 1) = r.y;
            w(t, i, 2) = r.theta;
            w(t, i, 3) = r.v;
            w(t, i, 4) = r.omega;
        }
    return out;
}

Matrix packed_rows(const AeSpec& ae, const std::vector<SequenceRecord>& records) {
    std::size_t total = 0;
    for (const auto& rec : records) total += rec.traj.states.size();
    Matrix rows(total, ae.channel_dim());
    std::size_t rr = 0;
    for (const auto& rec : records)
        for (const auto& s : rec.traj.states)
            pack_channels(s, ae.scales, rows.row(rr++));
    return rows;
}

std::vector<SequenceRecord> split_of(const Dataset& ds, const RunConfig& cfg,
                                     const std::string& split) {
    if (split == "all") return ds.records;
    auto parts = chronological_split(ds.records, cfg.training.split_fraction);
    if (split == "train") return parts.first;
    if (split == "val") return parts.second;
    throw ConfigError("unknown split \"" + split + "\" (train, val or all)");
}

}  // namespace

PYBIND11_MODULE(_fleetcast, m) {
    m.doc() = "continuous-time multi-robot motion forecasting core";

    py::register_exception<DivergenceError>(m, "DivergenceError");

    m.def(
        "load_config",
        [](const std::string& path_or_preset) {
            return run_config_to_json(load_run_config(path_or_preset));
        },
        py::arg("path_or_preset"),
        "Resolve a config file or preset name to its full JSON document");

    m.def(
        "gen_dataset",
        [](const std::string& config_json, const std::string& out_path,
           int threads) {
            RunConfig cfg = run_config_from_json(config_json);
            cfg.data.num_threads = threads;
            Dataset ds;
            ds.records = build_dataset(cfg.data);
            ds.header.robot_count = cfg.data.top_n;
            ds.header.horizon = static_cast<std::size_t>(cfg.data.chunk_len_s);
            ds.header.scales = cfg.model_spec().ae.scales;
            ds.header.record_count = ds.records.size();
            save_dataset_binary(out_path, ds);
            return ds.records.size();
        },
        py::arg("config_json"), py::arg("out_path"), py::arg("threads") = 1,
        "Simulate the configured scenarios and write a binary dataset; "
        "returns the sequence count");

    m.def(
        "pretrain_autoencoder",
        [](const std::string& config_json, const std::string& dataset_path,
           const std::string& out_checkpoint, int max_epochs) {
            const RunConfig cfg = run_config_from_json(config_json);
            const ModelSpec spec = cfg.model_spec();
            const Dataset ds = load_dataset(dataset_path);
            auto parts =
                chronological_split(ds.records, cfg.training.split_fraction);
            const Matrix train_rows = packed_rows(spec.ae, parts.first);
            const Matrix val_rows = parts.second.empty()
                                        ? train_rows
                                        : packed_rows(spec.ae, parts.second);
            ParamStore store;
            add_ae_segments(store, spec.ae, cfg.ae.seed);
            AePretrainConfig acfg = cfg.ae;
            if (max_epochs > 0) acfg.max_epochs = max_epochs;
            const AePretrainResult res =
                pretrain_ae(store, spec.ae, train_rows, val_rows, acfg);
            nlohmann::json extra = {
                {"format_version", 1},
                {"stage", "ae"},
                {"model_spec", nlohmann::json::parse(model_spec_to_json(spec))},
                {"val_pos_error_m", res.val_pos_error_m},
                {"epochs_run", res.epochs_run},
                {"reached_threshold", res.reached_threshold},
            };
            save_checkpoint(store, out_checkpoint, extra.dump());
            return py::dict(py::arg("val_pos_error_m") = res.val_pos_error_m,
                            py::arg("epochs_run") = res.epochs_run,
                            py::arg("reached_threshold") = res.reached_threshold);
        },
        py::arg("config_json"), py::arg("dataset_path"),
        py::arg("out_checkpoint"), py::arg("max_epochs") = 0,
        "Pretrain the autoencoder; returns reconstruction stats");

    m.def(
        "train_model",
        [](const std::string& config_json, const std::string& dataset_path,
           const std::string& ae_checkpoint, const std::string& out_checkpoint,
           int epochs, int threads) {
            const RunConfig cfg = run_config_from_json(config_json);
            const ModelSpec spec = cfg.model_spec();
            const Dataset ds = load_dataset(dataset_path);
            auto parts =
                chronological_split(ds.records, cfg.training.split_fraction);
            const LoadedCheckpoint ae_ck = load_checkpoint(ae_checkpoint);
            ParamStore store;
            add_model_segments(store, spec, cfg.ae.seed, cfg.training.seed);
            for (const char* seg : {"encoder", "decoder"}) {
                const auto src = ae_ck.store.values(seg);
                auto dst = store.values(seg);
                std::copy(src.begin(), src.end(), dst.begin());
            }
            freeze_ae(store);
            TrainConfig tc = cfg.training;
            if (epochs > 0) tc.epochs = epochs;
            tc.num_threads = threads;
            const TrainLog log =
                train_cde(spec, store, parts.first, parts.second, tc);
            nlohmann::json extra = {
                {"format_version", 1},
                {"stage", "cde"},
                {"model_spec", nlohmann::json::parse(model_spec_to_json(spec))},
                {"epochs_done", tc.epochs},
                {"schedule_epochs", tc.epochs},
            };
            save_checkpoint(store, out_checkpoint, extra.dump());
            py::dict out;
            out["epochs"] = log.epochs.size();
            if (!log.epochs.empty()) {
                out["train_total"] = log.epochs.back().train.total;
                out["val_ade_m"] = log.epochs.back().val_ade;
            }
            return out;
        },
        py::arg("config_json"), py::arg("dataset_path"),
        py::arg("ae_checkpoint"), py::arg("out_checkpoint"),
        py::arg("epochs") = 0, py::arg("threads") = 1,
        "Train the latent dynamics against a frozen autoencoder");

    m.def(
        "evaluate_checkpoint",
        [](const std::string& config_json, const std::string& checkpoint,
           const std::string& dataset_path, const std::vector<int>& horizons,
           const std::string& split, bool baseline, int threads) {
            const RunConfig cfg = run_config_from_json(config_json);
            const LoadedCheckpoint ck = load_checkpoint(checkpoint);
            ModelSpec spec;
            try {
                const auto extra = nlohmann::json::parse(ck.extra_json);
                spec = extra.contains("model_spec")
                           ? model_spec_from_json(extra["model_spec"].dump())
                           : cfg.model_spec();
            } catch (const nlohmann::json::exception&) {
                spec = cfg.model_spec();
            }
            const Dataset ds = load_dataset(dataset_path);
            const auto records = split_of(ds, cfg, split);
            const EvalReport rep =
                evaluate(spec, ck.store, records, horizons, baseline, threads);
            py::list rows;
            for (const EvalRow& row : rep.rows) {
                py::dict d;
                d["horizon_s"] = row.horizon_s;
                d["model_ade_m"] = row.model_ade;
                if (!std::isnan(row.baseline_ade))
                    d["baseline_ade_m"] = row.baseline_ade;
                rows.append(d);
            }
            return rows;
        },
        py::arg("config_json"), py::arg("checkpoint"), py::arg("dataset_path"),
        py::arg("horizons") = std::vector<int>{5, 10, 60},
        py::arg("split") = "val", py::arg("baseline") = true,
        py::arg("threads") = 1,
        "Model (and optional unicycle-baseline) displacement error per horizon");

    m.def(
        "forecast",
        [](const std::string& checkpoint, const py::array_t<double>& start,
           const py::array_t<double>& controls, std::size_t horizon_s) {
            const LoadedCheckpoint ck = load_checkpoint(checkpoint);
            const auto extra = nlohmann::json::parse(ck.extra_json);
            if (!extra.contains("model_spec"))
                throw ConfigError("checkpoint carries no model description");
            const ModelSpec spec =
                model_spec_from_json(extra["model_spec"].dump());
            const Forecast fc =
                forecast(spec, ck.store, state_from_array(start),
                         controls_from_array(controls), horizon_s);
            return trajectory_to_array(fc.traj);
        },
        py::arg("checkpoint"), py::arg("start"), py::arg("controls"),
        py::arg("horizon_s"),
        "Roll the model forward; start is (N, 5), controls (T, 2N); returns "
        "(horizon+1, N, 5)");

    m.def(
        "unicycle_baseline",
        [](const py::array_t<double>& start, const py::array_t<double>& controls,
           std::size_t horizon_s) {
            return trajectory_to_array(unicycle_baseline(
                state_from_array(start), controls_from_array(controls),
                horizon_s));
        },
        py::arg("start"), py::arg("controls"), py::arg("horizon_s"),
        "Open-loop analytical propagation of the same start and controls");

    m.def(
        "cluster_robots",
        [](const py::array_t<double>& start, std::size_t group_size) {
            const RobotGrouping g =
                cluster_robots(state_from_array(start), group_size);
            return g.groups;
        },
        py::arg("start"), py::arg("group_size") = 10,
        "Capacity-constrained position clustering; returns robot id groups");

    m.def(
        "checkpoint_info",
        [](const std::string& path) { return load_checkpoint(path).extra_json; },
        py::arg("path"), "The checkpoint's metadata JSON");

    m.attr("__version__") = "0.1.0";
}
