#include "fleetcast/model.hpp"

#include <cmath>
#include <utility>

#include <json.hpp>

namespace fleetcast {

using nlohmann::json;

ModelSpec ModelSpec::make(std::size_t robot_count, std::size_t latent_dim,
                          int ae_hidden, const std::vector<int>& field_hidden,
                          int substeps_per_second, NormScales scales) {
    ModelSpec spec;
    spec.ae = AeSpec::make(robot_count, latent_dim, ae_hidden, scales);
    spec.field =
        VectorFieldSpec::make(latent_dim, 2 * robot_count + 1, field_hidden);
    spec.substeps_per_second = substeps_per_second;
    spec.validate();
    return spec;
}

void ModelSpec::validate() const {
    ae.validate();
    field.validate();
    if (field.latent_dim != ae.latent_dim)
        throw ShapeError("model: vector field latent dim != AE latent dim");
    if (field.control_dim != 2 * ae.robot_count + 1)
        throw ShapeError("model: control dim must be 2N+1");
    if (substeps_per_second < 1)
        throw ConfigError("model: substeps_per_second must be at least 1");
}

namespace {

json mlp_to_json(const MlpSpec& m) {
    json j;
    j["layer_widths"] = m.layer_widths;
    j["hidden_activation"] = activation_name(m.hidden_activation);
    j["output_activation"] = activation_name(m.output_activation);
    return j;
}

MlpSpec mlp_from_json(const json& j) {
    MlpSpec m;
    m.layer_widths = j.at("layer_widths").get<std::vector<int>>();
    m.hidden_activation =
        activation_from_name(j.at("hidden_activation").get<std::string>());
    m.output_activation =
        activation_from_name(j.at("output_activation").get<std::string>());
    return m;
}

}  // namespace

std::string model_spec_to_json(const ModelSpec& spec) {
    json j;
    j["robot_count"] = spec.ae.robot_count;
    j["latent_dim"] = spec.ae.latent_dim;
    j["encoder"] = mlp_to_json(spec.ae.encoder);
    j["decoder"] = mlp_to_json(spec.ae.decoder);
    j["field"] = mlp_to_json(spec.field.mlp);
    j["substeps_per_second"] = spec.substeps_per_second;
    j["scales"] = {{"pos", spec.ae.scales.pos},
                   {"vel", spec.ae.scales.vel},
                   {"omega", spec.ae.scales.omega}};
    return j.dump();
}

ModelSpec model_spec_from_json(const std::string& text) {
    ModelSpec spec;
    try {
        const json j = json::parse(text);
        spec.ae.robot_count = j.at("robot_count").get<std::size_t>();
        spec.ae.latent_dim = j.at("latent_dim").get<std::size_t>();
        spec.ae.encoder = mlp_from_json(j.at("encoder"));
        spec.ae.decoder = mlp_from_json(j.at("decoder"));
        spec.ae.scales.pos = j.at("scales").at("pos").get<double>();
        spec.ae.scales.vel = j.at("scales").at("vel").get<double>();
        spec.ae.scales.omega = j.at("scales").at("omega").get<double>();
        spec.field.latent_dim = spec.ae.latent_dim;
        spec.field.control_dim = 2 * spec.ae.robot_count + 1;
        spec.field.mlp = mlp_from_json(j.at("field"));
        spec.substeps_per_second = j.at("substeps_per_second").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad model spec JSON: ") + e.what());
    }
    spec.validate();
    return spec;
}

void add_model_segments(ParamStore& store, const ModelSpec& spec,
                        std::uint64_t ae_seed, std::uint64_t field_seed) {
    spec.validate();
    add_ae_segments(store, spec.ae, ae_seed);
    store.add_mlp_segment("field", spec.field.mlp, field_seed);
    const double scale0[] = {0.1};
    store.add_raw_segment("field_scale", scale0);
}

void freeze_ae(ParamStore& store) {
    store.set_trainable("encoder", false);
    store.set_trainable("decoder", false);
}

ControlPath make_control_path(const ModelSpec& spec, const Matrix& controls,
                              bool controls_enabled) {
    if (controls.cols != 2 * spec.robot_count())
        throw ShapeError("make_control_path: controls must have 2N columns");
    ControlSequence seq;
    seq.robot_count = spec.robot_count();
    if (controls_enabled) {
        seq.values = controls;
    } else {
        seq.values = Matrix(controls.rows, controls.cols);
    }
    return ControlPath(seq);
}

Forecast forecast(const ModelSpec& spec, const ParamStore& store,
                  const JointState& start, const Matrix& controls,
                  std::size_t horizon_s, bool controls_enabled) {
    spec.validate();
    if (start.size() != spec.robot_count())
        throw ShapeError("forecast: start state has wrong robot count");
    if (horizon_s > 0 && controls.rows < horizon_s)
        throw ShapeError("forecast: controls do not cover the horizon");

    const std::vector<double> z0 = encode(spec.ae, store.values("encoder"), start);
    const std::size_t dim = spec.ae.channel_dim();

    Forecast out;
    out.channels = Matrix(horizon_s + 1, dim);
    mlp_forward(spec.ae.decoder, store.values("decoder"), z0,
                out.channels.row(0));
    if (horizon_s > 0) {
        const ControlPath path = make_control_path(spec, controls, controls_enabled);
        IntegrationConfig cfg;
        cfg.substeps_per_second = spec.substeps_per_second;
        cfg.output_times.resize(horizon_s);
        for (std::size_t t = 0; t < horizon_s; ++t)
            cfg.output_times[t] = static_cast<int>(t) + 1;
        const Matrix zs = rk4_integrate(spec.field, store.values("field"),
                                        store.values("field_scale")[0], z0, path,
                                        cfg);
        for (std::size_t t = 0; t < horizon_s; ++t)
            mlp_forward(spec.ae.decoder, store.values("decoder"), zs.row(t),
                        out.channels.row(t + 1));
    }

    out.traj.dt = 1.0;
    out.traj.states.reserve(horizon_s + 1);
    for (std::size_t t = 0; t <= horizon_s; ++t)
        out.traj.states.push_back(
            unpack_channels(out.channels.row(t), spec.ae.scales));
    return out;
}

Trajectory unicycle_baseline(const JointState& start, const Matrix& controls,
                             std::size_t horizon_s, int substeps_per_second) {
    const std::size_t n = start.size();
    if (n == 0) throw ShapeError("unicycle_baseline: empty start state");
    if (controls.cols != 2 * n)
        throw ShapeError("unicycle_baseline: controls must have 2N columns");
    if (controls.rows == 0)
        throw ShapeError("unicycle_baseline: controls are empty");
    if (horizon_s + 1 > controls.rows)
        throw ShapeError("unicycle_baseline: horizon exceeds the control schedule");

    std::vector<double> times(controls.rows);
    for (std::size_t t = 0; t < controls.rows; ++t)
        times[t] = static_cast<double>(t);
    const HermiteSpline ref(std::move(times), controls);

    std::vector<double> y0(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        y0[3 * i] = start.robots[i].x;
        y0[3 * i + 1] = start.robots[i].y;
        y0[3 * i + 2] = start.robots[i].theta;
    }

    Trajectory out;
    out.dt = 1.0;
    out.states.resize(horizon_s + 1);
    auto fill_state = [&](std::size_t t, std::span<const double> y) {
        JointState& s = out.states[t];
        s.robots.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.robots[i].x = y[3 * i];
            s.robots[i].y = y[3 * i + 1];
            s.robots[i].theta = wrap_angle(y[3 * i + 2]);
            s.robots[i].v = controls.at(t, 2 * i);
            s.robots[i].omega = controls.at(t, 2 * i + 1);
        }
    };
    fill_state(0, y0);
    if (horizon_s == 0) return out;

    IntegrationConfig cfg;
    cfg.substeps_per_second = substeps_per_second;
    cfg.output_times.resize(horizon_s);
    for (std::size_t t = 0; t < horizon_s; ++t)
        cfg.output_times[t] = static_cast<int>(t) + 1;

    std::vector<double> c(2 * n);
    auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
        ref.eval(t, c);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = c[2 * i], w = c[2 * i + 1];
            const double th = y[3 * i + 2];
            dy[3 * i] = v * std::cos(th);
            dy[3 * i + 1] = v * std::sin(th);
            dy[3 * i + 2] = w;
        }
    };
    const Matrix ys = rk4_integrate_generic(y0, cfg, rhs);
    for (std::size_t t = 0; t < horizon_s; ++t) fill_state(t + 1, ys.row(t));
    return out;
}

Trajectory unicycle_baseline(const SequenceRecord& rec, std::size_t horizon_s,
                             int substeps_per_second) {
    rec.traj.validate();
    if (rec.traj.horizon() < 2)
        throw ShapeError("unicycle_baseline: record is too short");
    const Matrix controls =
        controls_from_trajectory(rec.traj, rec.traj.horizon());
    return unicycle_baseline(rec.traj.states.front(), controls, horizon_s,
                             substeps_per_second);
}

}  // namespace fleetcast
