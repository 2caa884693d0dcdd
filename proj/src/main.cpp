#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fleetcast/plot.hpp"
#include "fleetcast/run_config.hpp"

namespace fleetcast {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

void ensure_parent_dir(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
}

Dataset load_dataset_checked(const std::string& path, std::size_t expect_robots) {
    if (!fs::exists(path))
        throw ConfigError("dataset not found at \"" + path +
                          "\" — run `fleetcast gen-data` first");
    Dataset ds = load_dataset(path);
    if (expect_robots != 0 && ds.header.robot_count != expect_robots)
        throw ConfigError("dataset has " + std::to_string(ds.header.robot_count) +
                          " robots per record but the config expects " +
                          std::to_string(expect_robots));
    return ds;
}

/// Common overrides shared by the data/train/eval commands.
struct CommonArgs {
    std::string config = "desk";
    std::string dataset;        // overrides paths.dataset
    std::string checkpoint_dir; // overrides paths.checkpoint_dir
    std::string report_dir;     // overrides paths.report_dir
    int threads = 0;
    bool quiet = false;
};

RunConfig load_with_overrides(const CommonArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    if (!a.dataset.empty()) cfg.paths.dataset = a.dataset;
    if (!a.checkpoint_dir.empty()) cfg.paths.checkpoint_dir = a.checkpoint_dir;
    if (!a.report_dir.empty()) cfg.paths.report_dir = a.report_dir;
    return cfg;
}

// ---------------------------------------------------------------- gen-data

struct GenArgs {
    CommonArgs common;
    std::size_t robots = 0;     // 0 = keep config
    std::size_t scenarios = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double stationary = -1.0;
    bool text = false;
};

int cmd_gen_data(const GenArgs& a) {
    RunConfig cfg = load_with_overrides(a.common);
    if (a.robots) {
        cfg.data.scenario.robot_count = a.robots;
        cfg.data.top_n = a.robots;  // records keep the whole fleet
    }
    if (a.scenarios) cfg.data.scenario_count = a.scenarios;
    if (a.seed_set) cfg.data.scenario.seed = a.seed;
    if (a.stationary >= 0.0) cfg.data.scenario.stationary_fraction = a.stationary;
    cfg.validate();
    cfg.data.num_threads = resolve_threads(a.common.threads);

    Dataset ds;
    ds.records = build_dataset(cfg.data);
    ds.header.robot_count = cfg.data.top_n;
    ds.header.horizon = static_cast<std::size_t>(cfg.data.chunk_len_s);
    ds.header.scales = cfg.model_spec().ae.scales;
    ds.header.record_count = ds.records.size();

    ensure_parent_dir(cfg.paths.dataset);
    if (a.text)
        save_dataset_text(cfg.paths.dataset, ds);
    else
        save_dataset_binary(cfg.paths.dataset, ds);

    json manifest = {
        {"format_version", 1},
        {"records", ds.records.size()},
        {"robots_per_record", ds.header.robot_count},
        {"samples_per_record", ds.header.horizon},
        {"scenario_count", cfg.data.scenario_count},
        {"base_seed", cfg.data.scenario.seed},
        {"mobile_fraction", 1.0 - cfg.data.scenario.stationary_fraction},
        {"sigma_v", cfg.data.scenario.sigma_v},
        {"sigma_omega", cfg.data.scenario.sigma_omega},
    };
    const std::string manifest_path = cfg.paths.dataset + ".manifest.json";
    std::ofstream mf(manifest_path, std::ios::trunc);
    if (!mf) throw IoError("cannot write manifest: " + manifest_path);
    mf << manifest.dump(2) << "\n";

    const fs::path parent = fs::path(cfg.paths.dataset).parent_path();
    echo_run_config(cfg, parent.empty() ? "." : parent.string());

    if (!a.common.quiet)
        std::printf("wrote %zu sequences (%zu robots x %zu samples) to %s\n",
                    ds.records.size(), ds.header.robot_count, ds.header.horizon,
                    cfg.paths.dataset.c_str());
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    CommonArgs common;
    std::string stage;
    int epochs = -1;      // override config total
    int stop_after = -1;  // pause after this epoch (checkpoint keeps schedule)
    bool resume = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

std::string ae_checkpoint_path(const RunConfig& cfg) {
    return cfg.paths.checkpoint_dir + "/ae.fck";
}
std::string cde_checkpoint_path(const RunConfig& cfg) {
    return cfg.paths.checkpoint_dir + "/cde.fck";
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

json model_spec_json(const ModelSpec& spec) {
    return json::parse(model_spec_to_json(spec));
}

ModelSpec spec_from_checkpoint(const LoadedCheckpoint& ck, const RunConfig& cfg) {
    json extra;
    try {
        extra = json::parse(ck.extra_json);
    } catch (const json::exception&) {
        return cfg.model_spec();
    }
    if (extra.contains("model_spec"))
        return model_spec_from_json(extra["model_spec"].dump());
    return cfg.model_spec();
}

int cmd_train_ae(const RunConfig& cfg, const TrainArgs& a) {
    const ModelSpec spec = cfg.model_spec();
    Dataset ds = load_dataset_checked(cfg.paths.dataset, spec.robot_count());
    auto [train_recs, val_recs] =
        chronological_split(ds.records, cfg.training.split_fraction);
    const Matrix train_rows = packed_rows(spec.ae, train_recs);
    const Matrix val_rows =
        val_recs.empty() ? train_rows : packed_rows(spec.ae, val_recs);

    ParamStore store;
    add_ae_segments(store, spec.ae, cfg.ae.seed);
    AePretrainConfig acfg = cfg.ae;
    if (a.epochs > 0) acfg.max_epochs = a.epochs;
    acfg.verbose = !a.common.quiet;
    const AePretrainResult res =
        pretrain_ae(store, spec.ae, train_rows, val_rows, acfg);

    ensure_dir(cfg.paths.checkpoint_dir);
    json extra = {
        {"format_version", 1},
        {"stage", "ae"},
        {"model_spec", model_spec_json(spec)},
        {"val_pos_error_m", res.val_pos_error_m},
        {"val_heading_error_deg", res.val_heading_error_deg},
        {"epochs_run", res.epochs_run},
        {"reached_threshold", res.reached_threshold},
    };
    save_checkpoint(store, ae_checkpoint_path(cfg), extra.dump());
    echo_run_config(cfg, cfg.paths.checkpoint_dir);

    std::printf("ae: val position error %.4f m after %d epochs -> %s\n",
                res.val_pos_error_m, res.epochs_run,
                ae_checkpoint_path(cfg).c_str());
    if (!res.reached_threshold)
        std::fprintf(stderr,
                     "warning: halt threshold %.3f m not reached; consider a "
                     "larger training.ae budget\n",
                     cfg.ae.halt_pos_error_m);
    return 0;
}

int cmd_train_cde(const RunConfig& cfg, const TrainArgs& a) {
    const std::string ae_path = ae_checkpoint_path(cfg);
    if (!fs::exists(ae_path))
        throw ConfigError("cde stage needs the pretrained autoencoder at \"" +
                          ae_path + "\" — run `fleetcast train --stage ae` first");
    const LoadedCheckpoint ae_ck = load_checkpoint(ae_path);
    const ModelSpec spec = spec_from_checkpoint(ae_ck, cfg);

    // The published gate for AE quality ("pose errors below 0.1 m").
    try {
        const json extra = json::parse(ae_ck.extra_json);
        const double err = extra.value("val_pos_error_m", 0.0);
        if (err > 0.1)
            throw ConfigError(
                "autoencoder reconstruction error " + std::to_string(err) +
                " m exceeds the 0.1 m gate — rerun `fleetcast train --stage "
                "ae` with a larger budget");
    } catch (const json::exception&) {
    }

    Dataset ds = load_dataset_checked(cfg.paths.dataset, spec.robot_count());
    auto [train_recs, val_recs] =
        chronological_split(ds.records, cfg.training.split_fraction);

    const int total_epochs = a.epochs > 0 ? a.epochs : cfg.training.epochs;
    int first_epoch = 0;
    ParamStore store;
    const std::string cde_path = cde_checkpoint_path(cfg);
    if (a.resume) {
        if (!fs::exists(cde_path))
            throw ConfigError("--resume needs an existing checkpoint at \"" +
                              cde_path + "\"");
        LoadedCheckpoint ck = load_checkpoint(cde_path);
        store = std::move(ck.store);
        try {
            const json extra = json::parse(ck.extra_json);
            first_epoch = extra.value("epochs_done", 0);
        } catch (const json::exception&) {
        }
        if (first_epoch >= total_epochs) {
            std::printf("cde: checkpoint already at epoch %d of %d, nothing to do\n",
                        first_epoch, total_epochs);
            return 0;
        }
    } else {
        add_model_segments(store, spec, cfg.ae.seed, cfg.training.seed);
        for (const char* seg : {"encoder", "decoder"}) {
            const auto src = ae_ck.store.values(seg);
            auto dst = store.values(seg);
            std::copy(src.begin(), src.end(), dst.begin());
        }
    }
    freeze_ae(store);

    TrainConfig tc = cfg.training;
    if (a.seed_set) tc.seed = a.seed;
    tc.num_threads = resolve_threads(a.common.threads);
    tc.verbose = !a.common.quiet;
    tc.first_epoch = first_epoch;
    tc.schedule_epochs = total_epochs;
    const int last_epoch =
        (a.stop_after > first_epoch && a.stop_after < total_epochs)
            ? a.stop_after
            : total_epochs;
    tc.epochs = last_epoch - first_epoch;

    const TrainLog log = train_cde(spec, store, train_recs, val_recs, tc);

    ensure_dir(cfg.paths.checkpoint_dir);
    ensure_dir(cfg.paths.report_dir);
    json extra = {
        {"format_version", 1},
        {"stage", "cde"},
        {"model_spec", model_spec_json(spec)},
        {"epochs_done", last_epoch},
        {"schedule_epochs", total_epochs},
        {"controls_enabled", tc.controls_enabled},
        {"physics_enabled", tc.physics_enabled},
        {"seed", tc.seed},
    };
    if (!log.epochs.empty()) extra["val_ade_m"] = log.epochs.back().val_ade;
    save_checkpoint(store, cde_path, extra.dump());
    const std::string log_path = cfg.paths.report_dir + "/cde_train_log.csv";
    save_train_log_csv(log_path, log, /*append=*/first_epoch > 0);
    echo_run_config(cfg, cfg.paths.checkpoint_dir);
    echo_run_config(cfg, cfg.paths.report_dir);

    std::printf("cde: epochs %d..%d done", first_epoch, last_epoch);
    if (!log.epochs.empty())
        std::printf(", val ADE@%ds %.3f m", tc.horizon_s, log.epochs.back().val_ade);
    std::printf(" -> %s\n", cde_path.c_str());
    if (last_epoch < total_epochs)
        std::printf("paused before epoch %d of %d; rerun with --resume to finish\n",
                    last_epoch, total_epochs);
    return 0;
}

int cmd_train_curriculum(const RunConfig& cfg, const TrainArgs& a) {
    const std::string cde_path = cde_checkpoint_path(cfg);
    if (!fs::exists(cde_path))
        throw ConfigError("curriculum stage needs the trained 60 s model at \"" +
                          cde_path + "\" — run `fleetcast train --stage cde` first");
    if (cfg.curriculum.empty())
        throw ConfigError("config has no training.curriculum stages");
    LoadedCheckpoint ck = load_checkpoint(cde_path);
    const ModelSpec spec = spec_from_checkpoint(ck, cfg);
    ParamStore store = std::move(ck.store);
    freeze_ae(store);

    Dataset ds = load_dataset_checked(cfg.paths.dataset, spec.robot_count());
    auto [train_recs, val_recs] =
        chronological_split(ds.records, cfg.training.split_fraction);

    TrainConfig base = cfg.training;
    if (a.seed_set) base.seed = a.seed;
    base.num_threads = resolve_threads(a.common.threads);
    base.verbose = !a.common.quiet;

    ensure_dir(cfg.paths.checkpoint_dir);
    ensure_dir(cfg.paths.report_dir);
    const std::string table_path = cfg.paths.report_dir + "/curriculum_stages.csv";
    std::ofstream table(table_path, std::ios::trunc);
    if (!table) throw IoError("cannot write stage table: " + table_path);
    table << "# fleetcast curriculum csv v1\n";
    table << "horizon_s,epochs,zero_shot_ade_m,fine_tuned_ade_m,baseline_ade_m,"
             "diverged\n";

    bool any_diverged = false;
    // One stage at a time so every stage leaves a checkpoint behind.
    for (const CurriculumStage& stage : cfg.curriculum) {
        CurriculumSchedule sched{{stage}};
        const std::vector<StageResult> results =
            curriculum_train(spec, store, train_recs, val_recs, sched, base);
        const StageResult& r = results.front();
        any_diverged = any_diverged || r.diverged;

        json extra = {
            {"format_version", 1},
            {"stage", "curriculum"},
            {"model_spec", model_spec_json(spec)},
            {"horizon_s", r.horizon_s},
            {"zero_shot_ade_m", r.zero_shot_ade},
            {"fine_tuned_ade_m", r.fine_tuned_ade},
            {"baseline_ade_m", r.baseline_ade},
            {"diverged", r.diverged},
        };
        const std::string stage_path = cfg.paths.checkpoint_dir + "/curriculum_" +
                                       std::to_string(r.horizon_s) + ".fck";
        save_checkpoint(store, stage_path, extra.dump());

        char line[256];
        std::snprintf(line, sizeof line, "%d,%d,%.6f,%.6f,%.6f,%d\n", r.horizon_s,
                      stage.epochs, r.zero_shot_ade, r.fine_tuned_ade,
                      r.baseline_ade, r.diverged ? 1 : 0);
        table << line;
        std::printf("stage %ds: zero-shot %.3f m, fine-tuned %.3f m, baseline "
                    "%.3f m%s -> %s\n",
                    r.horizon_s, r.zero_shot_ade, r.fine_tuned_ade, r.baseline_ade,
                    r.diverged ? " [diverged, params rolled back]" : "",
                    stage_path.c_str());
    }
    if (!table) throw IoError("failed while writing stage table: " + table_path);
    echo_run_config(cfg, cfg.paths.checkpoint_dir);
    echo_run_config(cfg, cfg.paths.report_dir);
    if (any_diverged) {
        std::fprintf(stderr, "warning: at least one stage diverged and was "
                             "rolled back\n");
        return 3;
    }
    return 0;
}

int cmd_train(const TrainArgs& a) {
    RunConfig cfg = load_with_overrides(a.common);
    cfg.validate();
    if (a.stage == "ae") return cmd_train_ae(cfg, a);
    if (a.stage == "cde") return cmd_train_cde(cfg, a);
    if (a.stage == "curriculum") return cmd_train_curriculum(cfg, a);
    throw ConfigError("unknown training stage \"" + a.stage +
                      "\" (expected ae, cde or curriculum)");
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    CommonArgs common;
    std::string checkpoint;
    std::vector<int> horizons = {5, 10, 60};
    std::string baseline = "none";
    std::vector<std::string> ablate;
    std::string split = "val";
};

std::vector<SequenceRecord> pick_split(const Dataset& ds, const RunConfig& cfg,
                                       const std::string& split) {
    if (split == "all") return ds.records;
    auto [train_recs, val_recs] =
        chronological_split(ds.records, cfg.training.split_fraction);
    if (split == "train") return train_recs;
    if (split == "val") return val_recs;
    throw ConfigError("unknown split \"" + split + "\" (expected train, val or all)");
}

int cmd_eval(const EvalArgs& a) {
    RunConfig cfg = load_with_overrides(a.common);
    cfg.validate();
    if (a.baseline != "none" && a.baseline != "unicycle")
        throw ConfigError("unknown baseline \"" + a.baseline +
                          "\" (expected unicycle or none)");
    for (const auto& ax : a.ablate)
        if (ax != "controls" && ax != "physics")
            throw ConfigError("unknown ablation axis \"" + ax +
                              "\" (expected controls and/or physics)");

    const std::string ck_path =
        a.checkpoint.empty() ? cde_checkpoint_path(cfg) : a.checkpoint;
    if (!fs::exists(ck_path))
        throw ConfigError("checkpoint not found at \"" + ck_path +
                          "\" — run `fleetcast train --stage cde` first");
    const LoadedCheckpoint ck = load_checkpoint(ck_path);
    const ModelSpec spec = spec_from_checkpoint(ck, cfg);

    Dataset ds = load_dataset_checked(cfg.paths.dataset, spec.robot_count());
    const std::vector<SequenceRecord> records = pick_split(ds, cfg, a.split);
    if (records.empty())
        throw ConfigError("split \"" + a.split + "\" selected no sequences");
    const int threads = resolve_threads(a.common.threads);

    const EvalReport report =
        evaluate(spec, ck.store, records, a.horizons, a.baseline == "unicycle",
                 threads);

    ensure_dir(cfg.paths.report_dir);
    save_eval_csv(cfg.paths.report_dir + "/eval.csv", report);
    save_histogram_csv(cfg.paths.report_dir + "/histogram.csv", report);

    std::string summary;
    char line[256];
    std::snprintf(line, sizeof line, "evaluated %zu sequences (%s split)\n",
                  records.size(), a.split.c_str());
    summary += line;
    for (const EvalRow& row : report.rows) {
        if (std::isnan(row.baseline_ade))
            std::snprintf(line, sizeof line, "  ADE@%-4ds  model %8.3f m\n",
                          row.horizon_s, row.model_ade);
        else
            std::snprintf(line, sizeof line,
                          "  ADE@%-4ds  model %8.3f m   unicycle %8.3f m   "
                          "ratio %.2fx\n",
                          row.horizon_s, row.model_ade, row.baseline_ade,
                          row.baseline_ade / row.model_ade);
        summary += line;
    }
    std::ofstream sum(cfg.paths.report_dir + "/summary.txt", std::ios::trunc);
    sum << summary;
    std::fputs(summary.c_str(), stdout);

    if (!a.ablate.empty()) {
        const bool ab_controls =
            std::find(a.ablate.begin(), a.ablate.end(), "controls") != a.ablate.end();
        const bool ab_physics =
            std::find(a.ablate.begin(), a.ablate.end(), "physics") != a.ablate.end();
        const int h = *std::max_element(a.horizons.begin(), a.horizons.end());
        const std::string ab_path = cfg.paths.report_dir + "/ablation.csv";
        std::ofstream ab(ab_path, std::ios::trunc);
        if (!ab) throw IoError("cannot write ablation grid: " + ab_path);
        ab << "# fleetcast ablation csv v1\n";
        ab << "controls,physics,ade_m,loss_total,l_pred,l_uni,l_acc\n";
        for (const bool controls_on : {true, false}) {
            if (!controls_on && !ab_controls) continue;
            for (const bool physics_on : {true, false}) {
                if (!physics_on && !ab_physics) continue;
                LossWeights w = cfg.training.weights;
                if (!physics_on) {
                    w.w_uni = 0.0;
                    w.w_acc = 0.0;
                }
                const EvalStats stats = evaluate_model(
                    spec, ck.store, records, h, w, controls_on, threads);
                std::snprintf(line, sizeof line, "%d,%d,%.6f,%.9e,%.9e,%.9e,%.9e\n",
                              controls_on ? 1 : 0, physics_on ? 1 : 0, stats.ade,
                              stats.loss.total, stats.loss.pred, stats.loss.uni,
                              stats.loss.acc);
                ab << line;
                std::printf("  ablation controls=%d physics=%d: ADE@%ds %.3f m\n",
                            controls_on, physics_on, h, stats.ade);
            }
        }
        if (!ab) throw IoError("failed while writing ablation grid: " + ab_path);
    }

    echo_run_config(cfg, cfg.paths.report_dir);
    return 0;
}

// ---------------------------------------------------------------- forecast

struct ForecastArgs {
    std::string config;  // optional; supplies arena frame + default paths
    std::string checkpoint;
    std::string input;    // JSON start/controls file
    std::string dataset;  // alternative: pull a record from a dataset
    int record = -1;
    int horizon = 60;
    std::string out = "forecast";
    bool svg = false;
    bool quiet = false;
};

struct ForecastInput {
    JointState start;
    Matrix controls;
    Trajectory truth;  // empty unless pulled from a dataset
};

ForecastInput parse_forecast_json(const std::string& path, std::size_t robots) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open forecast input \"" + path + "\"");
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("forecast input: parse failure: ") + e.what());
    }
    if (!j.is_object() || !j.contains("start") || !j.contains("controls"))
        throw ConfigError("forecast input needs \"start\" and \"controls\"");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "start" && it.key() != "controls" &&
            it.key() != "format_version")
            throw ConfigError("forecast input: unknown key \"" + it.key() + "\"");

    ForecastInput out;
    try {
        for (const auto& r : j["start"]) {
            RobotState s;
            s.x = r.at("x").get<double>();
            s.y = r.at("y").get<double>();
            s.theta = r.at("theta").get<double>();
            s.v = r.value("v", 0.0);
            s.omega = r.value("omega", 0.0);
            out.start.robots.push_back(s);
        }
        const auto& rows = j["controls"];
        out.controls = Matrix(rows.size(), 2 * out.start.size());
        std::size_t rr = 0;
        for (const auto& row : rows) {
            if (row.size() != 2 * out.start.size())
                throw ConfigError(
                    "forecast input: control rows must have 2N entries");
            for (std::size_t c = 0; c < row.size(); ++c)
                out.controls.at(rr, c) = row[c].get<double>();
            ++rr;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("forecast input: bad value: ") + e.what());
    }
    if (robots != 0 && out.start.size() != robots)
        throw ConfigError("forecast input has " + std::to_string(out.start.size()) +
                          " robots but the checkpoint expects " +
                          std::to_string(robots));
    return out;
}

int cmd_forecast(const ForecastArgs& a) {
    if (a.checkpoint.empty())
        throw ConfigError("forecast needs --checkpoint");
    if (!fs::exists(a.checkpoint))
        throw ConfigError("checkpoint not found at \"" + a.checkpoint + "\"");
    if (a.input.empty() == (a.dataset.empty() || a.record < 0))
        throw ConfigError(
            "forecast needs exactly one input: --input FILE, or --dataset FILE "
            "with --record K");

    const LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
    json extra;
    try {
        extra = json::parse(ck.extra_json);
    } catch (const json::exception&) {
    }
    ModelSpec spec;
    double arena_w = 0.0, arena_h = 0.0;
    if (extra.contains("model_spec")) {
        spec = model_spec_from_json(extra["model_spec"].dump());
    } else if (!a.config.empty()) {
        spec = load_run_config(a.config).model_spec();
    } else {
        throw ConfigError(
            "checkpoint carries no model description; pass --config");
    }
    if (!a.config.empty()) {
        const RunConfig cfg = load_run_config(a.config);
        arena_w = cfg.data.scenario.arena_width;
        arena_h = cfg.data.scenario.arena_height;
    }

    ForecastInput input;
    if (!a.input.empty()) {
        input = parse_forecast_json(a.input, spec.robot_count());
    } else {
        const Dataset ds = load_dataset_checked(a.dataset, 0);
        if (a.record >= static_cast<int>(ds.records.size()))
            throw ConfigError("--record " + std::to_string(a.record) +
                              " out of range (dataset has " +
                              std::to_string(ds.records.size()) + " sequences)");
        const SequenceRecord& rec = ds.records[static_cast<std::size_t>(a.record)];
        if (rec.traj.robot_count() != spec.robot_count())
            throw ConfigError("dataset sequences have " +
                              std::to_string(rec.traj.robot_count()) +
                              " robots but the checkpoint expects " +
                              std::to_string(spec.robot_count()));
        const std::size_t want = static_cast<std::size_t>(a.horizon);
        const std::size_t have = rec.traj.horizon() - 1;
        if (want > have)
            throw ConfigError("record covers only " + std::to_string(have) +
                              " s, horizon " + std::to_string(a.horizon) +
                              " s requested");
        input.start = rec.traj.states.front();
        input.controls = controls_from_trajectory(rec.traj, want == 0 ? 1 : want);
        input.truth.dt = rec.traj.dt;
        input.truth.states.assign(rec.traj.states.begin(),
                                  rec.traj.states.begin() + want + 1);
    }

    const Forecast fc = forecast(spec, ck.store, input.start, input.controls,
                                 static_cast<std::size_t>(a.horizon));

    const std::string csv_path = a.out + ".csv";
    ensure_parent_dir(csv_path);
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw IoError("cannot open forecast output: " + csv_path);
    out << "# fleetcast forecast csv v1\n";
    out << "t_s,robot,x_m,y_m,theta_rad,v_mps,omega_radps\n";
    char line[192];
    for (std::size_t t = 0; t < fc.traj.states.size(); ++t)
        for (std::size_t i = 0; i < fc.traj.states[t].size(); ++i) {
            const RobotState& r = fc.traj.states[t].robots[i];
            std::snprintf(line, sizeof line, "%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                          t, i, r.x, r.y, r.theta, r.v, r.omega);
            out << line;
        }
    if (!out) throw IoError("failed while writing forecast: " + csv_path);
    if (!a.quiet) std::printf("forecast -> %s\n", csv_path.c_str());

    if (a.svg) {
        const std::string svg_path = a.out + ".svg";
        save_forecast_svg(svg_path, fc.traj,
                          input.truth.states.empty() ? nullptr : &input.truth,
                          arena_w, arena_h);
        if (!a.quiet) std::printf("plot -> %s\n", svg_path.c_str());
    }
    return 0;
}

// -------------------------------------------------------------------- main

int dispatch(int argc, char** argv) {
    CLI::App app{
        "fleetcast: goal-conditioned continuous-time motion forecasting for "
        "robot fleets"};
    app.require_subcommand(1);

    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand(
        "gen-data", "Simulate fleet scenarios and write a sequence dataset");
    gen_cmd->add_option("--config", gen.common.config,
                        "Config file, or preset name (toy|desk|paper)");
    gen_cmd->add_option("--out", gen.common.dataset, "Dataset output path");
    gen_cmd->add_option("--robots", gen.robots,
                        "Scenario robot count; records keep the whole fleet");
    gen_cmd->add_option("--scenarios", gen.scenarios, "Number of scenarios");
    gen_cmd->add_option("--seed", gen.seed, "Base scenario seed")
        ->each([&](const std::string&) { gen.seed_set = true; });
    gen_cmd->add_option("--stationary", gen.stationary,
                        "Fraction of parked robots (0..1)");
    gen_cmd->add_flag("--text", gen.text, "Write the text format instead of binary");
    gen_cmd->add_option("--threads", gen.common.threads,
                        "Worker threads (default: all cores)");
    gen_cmd->add_flag("--quiet", gen.common.quiet, "Suppress progress output");

    TrainArgs tr;
    CLI::App* train_cmd =
        app.add_subcommand("train", "Run a training stage (ae, cde, curriculum)");
    train_cmd->add_option("--config", tr.common.config,
                          "Config file, or preset name (toy|desk|paper)");
    train_cmd->add_option("--stage", tr.stage, "ae | cde | curriculum")
        ->required();
    train_cmd->add_option("--dataset", tr.common.dataset, "Dataset path override");
    train_cmd->add_option("--checkpoints", tr.common.checkpoint_dir,
                          "Checkpoint directory override");
    train_cmd->add_option("--reports", tr.common.report_dir,
                          "Report directory override");
    train_cmd->add_option("--epochs", tr.epochs, "Total epoch budget override");
    train_cmd->add_option("--stop-after", tr.stop_after,
                          "Pause after this epoch (resume later)");
    train_cmd->add_flag("--resume", tr.resume,
                        "Continue the cde stage from its checkpoint");
    train_cmd->add_option("--seed", tr.seed, "Training seed override")
        ->each([&](const std::string&) { tr.seed_set = true; });
    train_cmd->add_option("--threads", tr.common.threads,
                          "Worker threads (default: all cores)");
    train_cmd->add_flag("--quiet", tr.common.quiet, "Suppress progress output");

    EvalArgs ev;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "Evaluate a checkpoint against a dataset split");
    eval_cmd->add_option("--config", ev.common.config,
                         "Config file, or preset name (toy|desk|paper)");
    eval_cmd->add_option("--checkpoint", ev.checkpoint,
                         "Checkpoint path (default: <checkpoints>/cde.fck)");
    eval_cmd->add_option("--dataset", ev.common.dataset, "Dataset path override");
    eval_cmd->add_option("--reports", ev.common.report_dir,
                         "Report directory override");
    eval_cmd->add_option("--horizons", ev.horizons,
                         "Evaluation horizons in seconds (default 5 10 60)");
    eval_cmd->add_option("--baseline", ev.baseline,
                         "Paired analytical baseline: unicycle | none");
    eval_cmd->add_option("--ablate", ev.ablate,
                         "Ablation axes to grid over: controls, physics")
        ->delimiter(',');
    eval_cmd->add_option("--split", ev.split, "train | val | all (default val)");
    eval_cmd->add_option("--threads", ev.common.threads,
                         "Worker threads (default: all cores)");
    eval_cmd->add_flag("--quiet", ev.common.quiet, "Suppress progress output");

    ForecastArgs fcst;
    CLI::App* fc_cmd = app.add_subcommand(
        "forecast", "Roll one sequence forward and write a trajectory (+SVG)");
    fc_cmd->add_option("--checkpoint", fcst.checkpoint, "Trained model checkpoint")
        ->required();
    fc_cmd->add_option("--config", fcst.config,
                       "Config for the arena frame (file or preset)");
    fc_cmd->add_option("--input", fcst.input,
                       "JSON file with \"start\" poses and \"controls\" rows");
    fc_cmd->add_option("--dataset", fcst.dataset,
                       "Dataset to pull --record from (adds ground truth)");
    fc_cmd->add_option("--record", fcst.record, "Sequence index within --dataset");
    fc_cmd->add_option("--horizon", fcst.horizon, "Forecast length in seconds");
    fc_cmd->add_option("--out", fcst.out, "Output prefix (.csv / .svg appended)");
    fc_cmd->add_flag("--svg", fcst.svg, "Also write an SVG plot");
    fc_cmd->add_flag("--quiet", fcst.quiet, "Suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (eval_cmd->parsed()) return cmd_eval(ev);
    if (fc_cmd->parsed()) return cmd_forecast(fcst);
    return 2;
}

}  // namespace
}  // namespace fleetcast

int main(int argc, char** argv) {
    try {
        return fleetcast::dispatch(argc, argv);
    } catch (const fleetcast::DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
