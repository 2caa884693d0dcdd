#include "fleetcast/run_config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "fleetcast/errors.hpp"

namespace fleetcast {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& block) {
    if (!j.is_object())
        throw ConfigError("config: \"" + block + "\" must be a JSON object");
}

void reject_unknown(const json& obj, const std::string& block,
                    std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known)
            throw ConfigError("config: unknown key \"" + it.key() + "\" in \"" +
                              block + "\" block");
    }
}

template <typename T>
void read_field(const json& obj, const std::string& block, const char* key,
                T& target) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        target = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for \"" + block + "." + key + "\"");
    }
}

void read_weights(const json& obj, const std::string& block, LossWeights& w) {
    const auto it = obj.find("weights");
    if (it == obj.end()) return;
    if (!it->is_array() || it->size() != 3)
        throw ConfigError("config: \"" + block +
                          ".weights\" must be [w_pred, w_uni, w_acc]");
    try {
        w.w_pred = (*it)[0].get<double>();
        w.w_uni = (*it)[1].get<double>();
        w.w_acc = (*it)[2].get<double>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value in \"" + block + ".weights\"");
    }
}

void parse_scenario(const json& j, RunConfig& cfg) {
    require_object(j, "scenario");
    reject_unknown(j, "scenario",
                   {"arena_width", "arena_height", "robots", "duration_s",
                    "seed", "sigma_v", "sigma_omega", "interaction_radius",
                    "v_max", "omega_max", "stationary_fraction",
                    "scenario_count", "top_n", "chunk_len_s", "slide_s"});
    FleetScenario& s = cfg.data.scenario;
    read_field(j, "scenario", "arena_width", s.arena_width);
    read_field(j, "scenario", "arena_height", s.arena_height);
    read_field(j, "scenario", "robots", s.robot_count);
    read_field(j, "scenario", "duration_s", s.duration_s);
    read_field(j, "scenario", "seed", s.seed);
    read_field(j, "scenario", "sigma_v", s.sigma_v);
    read_field(j, "scenario", "sigma_omega", s.sigma_omega);
    read_field(j, "scenario", "interaction_radius", s.interaction_radius);
    read_field(j, "scenario", "v_max", s.v_max);
    read_field(j, "scenario", "omega_max", s.omega_max);
    read_field(j, "scenario", "stationary_fraction", s.stationary_fraction);
    read_field(j, "scenario", "scenario_count", cfg.data.scenario_count);
    read_field(j, "scenario", "top_n", cfg.data.top_n);
    read_field(j, "scenario", "chunk_len_s", cfg.data.chunk_len_s);
    read_field(j, "scenario", "slide_s", cfg.data.slide_s);
}

void parse_model(const json& j, RunConfig& cfg) {
    require_object(j, "model");
    reject_unknown(j, "model",
                   {"latent_dim", "ae_hidden", "field_hidden",
                    "substeps_per_second", "scales"});
    ModelConfig& m = cfg.model;
    read_field(j, "model", "latent_dim", m.latent_dim);
    read_field(j, "model", "ae_hidden", m.ae_hidden);
    read_field(j, "model", "field_hidden", m.field_hidden);
    read_field(j, "model", "substeps_per_second", m.substeps_per_second);
    const auto it = j.find("scales");
    if (it != j.end()) {
        if (it->is_string() && it->get<std::string>() == "auto") {
            m.auto_scales = true;
        } else if (it->is_array() && it->size() == 3) {
            try {
                m.scales.pos = (*it)[0].get<double>();
                m.scales.vel = (*it)[1].get<double>();
                m.scales.omega = (*it)[2].get<double>();
            } catch (const json::exception&) {
                throw ConfigError("config: bad value in \"model.scales\"");
            }
            m.auto_scales = false;
        } else {
            throw ConfigError(
                "config: \"model.scales\" must be \"auto\" or [pos, vel, omega]");
        }
    }
}

void parse_ae(const json& j, RunConfig& cfg) {
    require_object(j, "training.ae");
    reject_unknown(j, "training.ae",
                   {"max_epochs", "batch_size", "samples_per_epoch", "lr_start",
                    "lr_end", "halt_pos_error_m", "seed", "w_pos", "w_heading",
                    "w_vel", "w_omega"});
    AePretrainConfig& a = cfg.ae;
    read_field(j, "training.ae", "max_epochs", a.max_epochs);
    read_field(j, "training.ae", "batch_size", a.batch_size);
    read_field(j, "training.ae", "samples_per_epoch", a.samples_per_epoch);
    read_field(j, "training.ae", "lr_start", a.lr_start);
    read_field(j, "training.ae", "lr_end", a.lr_end);
    read_field(j, "training.ae", "halt_pos_error_m", a.halt_pos_error_m);
    read_field(j, "training.ae", "seed", a.seed);
    read_field(j, "training.ae", "w_pos", a.w_pos);
    read_field(j, "training.ae", "w_heading", a.w_heading);
    read_field(j, "training.ae", "w_vel", a.w_vel);
    read_field(j, "training.ae", "w_omega", a.w_omega);
}

void parse_curriculum(const json& j, RunConfig& cfg) {
    if (!j.is_array())
        throw ConfigError("config: \"training.curriculum\" must be an array");
    cfg.curriculum.clear();
    for (const auto& stage : j) {
        require_object(stage, "training.curriculum[]");
        reject_unknown(stage, "training.curriculum[]", {"horizon_s", "epochs"});
        CurriculumStage st;
        read_field(stage, "training.curriculum[]", "horizon_s", st.horizon_s);
        read_field(stage, "training.curriculum[]", "epochs", st.epochs);
        cfg.curriculum.push_back(st);
    }
}

void parse_training(const json& j, RunConfig& cfg) {
    require_object(j, "training");
    reject_unknown(j, "training",
                   {"batch_size", "epochs", "lr_max", "lr_min", "weights",
                    "horizon_s", "controls_enabled", "physics_enabled", "seed",
                    "split_fraction", "ae", "curriculum"});
    TrainConfig& t = cfg.training;
    read_field(j, "training", "batch_size", t.batch_size);
    read_field(j, "training", "epochs", t.epochs);
    read_field(j, "training", "lr_max", t.lr_max);
    read_field(j, "training", "lr_min", t.lr_min);
    read_weights(j, "training", t.weights);
    read_field(j, "training", "horizon_s", t.horizon_s);
    read_field(j, "training", "controls_enabled", t.controls_enabled);
    read_field(j, "training", "physics_enabled", t.physics_enabled);
    read_field(j, "training", "seed", t.seed);
    read_field(j, "training", "split_fraction", t.split_fraction);
    if (const auto it = j.find("ae"); it != j.end()) parse_ae(*it, cfg);
    if (const auto it = j.find("curriculum"); it != j.end())
        parse_curriculum(*it, cfg);
}

void parse_paths(const json& j, RunConfig& cfg) {
    require_object(j, "paths");
    reject_unknown(j, "paths", {"dataset", "checkpoint_dir", "report_dir"});
    read_field(j, "paths", "dataset", cfg.paths.dataset);
    read_field(j, "paths", "checkpoint_dir", cfg.paths.checkpoint_dir);
    read_field(j, "paths", "report_dir", cfg.paths.report_dir);
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: parse failure: ") + e.what());
    }
    require_object(j, "<root>");
    reject_unknown(j, "<root>", {"scenario", "model", "training", "paths"});
    RunConfig cfg;
    if (const auto it = j.find("scenario"); it != j.end()) parse_scenario(*it, cfg);
    if (const auto it = j.find("model"); it != j.end()) parse_model(*it, cfg);
    if (const auto it = j.find("training"); it != j.end()) parse_training(*it, cfg);
    if (const auto it = j.find("paths"); it != j.end()) parse_paths(*it, cfg);
    cfg.validate();
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    const FleetScenario& s = cfg.data.scenario;
    j["scenario"] = {{"arena_width", s.arena_width},
                     {"arena_height", s.arena_height},
                     {"robots", s.robot_count},
                     {"duration_s", s.duration_s},
                     {"seed", s.seed},
                     {"sigma_v", s.sigma_v},
                     {"sigma_omega", s.sigma_omega},
                     {"interaction_radius", s.interaction_radius},
                     {"v_max", s.v_max},
                     {"omega_max", s.omega_max},
                     {"stationary_fraction", s.stationary_fraction},
                     {"scenario_count", cfg.data.scenario_count},
                     {"top_n", cfg.data.top_n},
                     {"chunk_len_s", cfg.data.chunk_len_s},
                     {"slide_s", cfg.data.slide_s}};
    json scales;
    if (cfg.model.auto_scales) {
        scales = "auto";
    } else {
        scales = {cfg.model.scales.pos, cfg.model.scales.vel,
                  cfg.model.scales.omega};
    }
    j["model"] = {{"latent_dim", cfg.model.latent_dim},
                  {"ae_hidden", cfg.model.ae_hidden},
                  {"field_hidden", cfg.model.field_hidden},
                  {"substeps_per_second", cfg.model.substeps_per_second},
                  {"scales", scales}};
    const TrainConfig& t = cfg.training;
    json curriculum = json::array();
    for (const auto& st : cfg.curriculum)
        curriculum.push_back({{"horizon_s", st.horizon_s}, {"epochs", st.epochs}});
    j["training"] = {
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"lr_max", t.lr_max},
        {"lr_min", t.lr_min},
        {"weights", {t.weights.w_pred, t.weights.w_uni, t.weights.w_acc}},
        {"horizon_s", t.horizon_s},
        {"controls_enabled", t.controls_enabled},
        {"physics_enabled", t.physics_enabled},
        {"seed", t.seed},
        {"split_fraction", t.split_fraction},
        {"ae",
         {{"max_epochs", cfg.ae.max_epochs},
          {"batch_size", cfg.ae.batch_size},
          {"samples_per_epoch", cfg.ae.samples_per_epoch},
          {"lr_start", cfg.ae.lr_start},
          {"lr_end", cfg.ae.lr_end},
          {"halt_pos_error_m", cfg.ae.halt_pos_error_m},
          {"seed", cfg.ae.seed},
          {"w_pos", cfg.ae.w_pos},
          {"w_heading", cfg.ae.w_heading},
          {"w_vel", cfg.ae.w_vel},
          {"w_omega", cfg.ae.w_omega}}},
        {"curriculum", curriculum}};
    j["paths"] = {{"dataset", cfg.paths.dataset},
                  {"checkpoint_dir", cfg.paths.checkpoint_dir},
                  {"report_dir", cfg.paths.report_dir}};
    return j.dump(2) + "\n";
}

void RunConfig::validate() const {
    data.scenario.validate();
    if (data.scenario_count == 0)
        throw ConfigError("config: scenario_count must be positive");
    if (data.top_n == 0 || data.top_n > data.scenario.robot_count)
        throw ConfigError("config: top_n must be in [1, robots]");
    if (data.chunk_len_s < 2 || data.chunk_len_s > data.scenario.duration_s)
        throw ConfigError("config: chunk_len_s must fit the scenario duration");
    if (data.slide_s < 1)
        throw ConfigError("config: slide_s must be positive");
    if (model.latent_dim == 0)
        throw ConfigError("config: latent_dim must be positive");
    if (model.ae_hidden < 1)
        throw ConfigError("config: ae_hidden must be positive");
    if (model.field_hidden.empty() ||
        std::any_of(model.field_hidden.begin(), model.field_hidden.end(),
                    [](int w) { return w < 1; }))
        throw ConfigError("config: field_hidden must be positive widths");
    if (model.substeps_per_second < 1)
        throw ConfigError("config: substeps_per_second must be at least 1");
    if (!model.auto_scales &&
        (model.scales.pos <= 0 || model.scales.vel <= 0 || model.scales.omega <= 0))
        throw ConfigError("config: scales must be positive");
    training.validate();
    if (data.chunk_len_s < training.horizon_s)
        throw ConfigError("config: chunk_len_s must cover training.horizon_s");
    if (ae.max_epochs < 1 || ae.batch_size < 1 || ae.samples_per_epoch == 0)
        throw ConfigError("config: training.ae epoch/batch sizes must be positive");
    if (ae.lr_start <= 0 || ae.lr_end <= 0 || ae.lr_end > ae.lr_start)
        throw ConfigError("config: training.ae needs lr_start >= lr_end > 0");
    if (ae.halt_pos_error_m <= 0)
        throw ConfigError("config: training.ae halt_pos_error_m must be positive");
    if (!curriculum.empty()) {
        CurriculumSchedule sched{curriculum};
        sched.validate();
        if (curriculum.front().horizon_s <= training.horizon_s)
            throw ConfigError(
                "config: first curriculum horizon must exceed training.horizon_s");
        if (data.chunk_len_s < curriculum.back().horizon_s)
            throw ConfigError(
                "config: chunk_len_s must cover the last curriculum horizon");
    }
    if (paths.dataset.empty() || paths.checkpoint_dir.empty() ||
        paths.report_dir.empty())
        throw ConfigError("config: paths must be non-empty");
}

ModelSpec RunConfig::model_spec() const {
    NormScales scales = model.scales;
    if (model.auto_scales) {
        scales.pos = std::max(data.scenario.arena_width,
                              data.scenario.arena_height) / 2.0;
        scales.vel = data.scenario.v_max;
        scales.omega = data.scenario.omega_max;
    }
    return ModelSpec::make(data.top_n, model.latent_dim, model.ae_hidden,
                           model.field_hidden, model.substeps_per_second, scales);
}

RunConfig RunConfig::preset(const std::string& name) {
    RunConfig cfg;
    if (name == "toy") {
        cfg.data.scenario.arena_width = 30.0;
        cfg.data.scenario.arena_height = 20.0;
        cfg.data.scenario.robot_count = 3;
        cfg.data.scenario.duration_s = 140;
        cfg.data.scenario.seed = 4;
        cfg.data.scenario.sigma_v = 0.0;
        cfg.data.scenario.sigma_omega = 0.0;
        cfg.data.scenario_count = 4;
        cfg.data.top_n = 2;
        cfg.data.chunk_len_s = 61;
        cfg.data.slide_s = 40;
        cfg.model.latent_dim = 8;
        cfg.model.ae_hidden = 64;
        cfg.model.field_hidden = {32, 32};
        cfg.ae.max_epochs = 1200;
        cfg.ae.samples_per_epoch = 2048;
        cfg.ae.lr_start = 3e-3;
        cfg.ae.lr_end = 1e-5;
        cfg.ae.halt_pos_error_m = 0.02;
        cfg.training.batch_size = 8;
        cfg.training.epochs = 300;
        cfg.training.lr_max = 3e-3;
        cfg.training.lr_min = 1e-5;
        // 61 s chunks leave no room for longer-horizon stages.
        cfg.curriculum.clear();
        cfg.paths.dataset = "out/toy/dataset.fcds";
        cfg.paths.checkpoint_dir = "out/toy/checkpoints";
        cfg.paths.report_dir = "out/toy/reports";
        return cfg;
    }
    if (name == "desk") {
        cfg.data.scenario_count = 55;  // 37 chunks each -> 2035 sequences
        cfg.data.top_n = 10;
        cfg.model.latent_dim = 30;
        cfg.model.ae_hidden = 128;
        cfg.model.field_hidden = {128, 128, 128, 128};
        cfg.ae.max_epochs = 400;
        cfg.ae.halt_pos_error_m = 0.05;
        cfg.training.batch_size = 64;
        cfg.training.epochs = 60;
        cfg.training.lr_max = 3e-4;
        cfg.training.lr_min = 3e-7;
        cfg.curriculum = {{120, 20}, {180, 15}, {240, 10}};
        cfg.paths.dataset = "out/desk/dataset.fcds";
        cfg.paths.checkpoint_dir = "out/desk/checkpoints";
        cfg.paths.report_dir = "out/desk/reports";
        return cfg;
    }
    if (name == "paper") {
        cfg = preset("desk");
        cfg.model.ae_hidden = 512;
        cfg.model.field_hidden = {512, 512, 512, 512};
        cfg.training.batch_size = 1600;
        cfg.training.epochs = 800;
        cfg.paths.dataset = "out/paper/dataset.fcds";
        cfg.paths.checkpoint_dir = "out/paper/checkpoints";
        cfg.paths.report_dir = "out/paper/reports";
        return cfg;
    }
    throw ConfigError("config: unknown preset \"" + name +
                      "\" (expected toy, desk or paper)");
}

RunConfig load_run_config(const std::string& path_or_preset) {
    if (path_or_preset == "toy" || path_or_preset == "desk" ||
        path_or_preset == "paper")
        return RunConfig::preset(path_or_preset);
    std::ifstream in(path_or_preset);
    if (!in)
        throw IoError("config: cannot open \"" + path_or_preset + "\"");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

void echo_run_config(const RunConfig& cfg, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const std::string path = dir + "/config.json";
    std::ofstream out(path);
    if (!out)
        throw IoError("config: cannot write \"" + path + "\"");
    out << run_config_to_json(cfg);
}

}  // namespace fleetcast
