#include "fleetcast/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace fleetcast {

static_assert(std::endian::native == std::endian::little,
              "checkpoint and dataset formats assume a little-endian host");

using nlohmann::json;

std::size_t ParamStore::add_segment(SegmentInfo info, std::span<const double> init) {
    if (has_segment(info.name))
        throw ConfigError("duplicate parameter segment name: " + info.name);
    if (info.name.empty()) throw ConfigError("parameter segment name is empty");
    info.offset = values_.size();
    info.length = init.size();
    values_.insert(values_.end(), init.begin(), init.end());
    grads_.resize(values_.size(), 0.0);
    adam_m_.resize(values_.size(), 0.0);
    adam_v_.resize(values_.size(), 0.0);
    segments_.push_back(std::move(info));
    return segments_.size() - 1;
}

std::size_t ParamStore::add_mlp_segment(const std::string& name,
                                        const MlpSpec& spec,
                                        std::uint64_t init_seed, bool trainable) {
    SegmentInfo info;
    info.name = name;
    info.trainable = trainable;
    info.mlp = spec;
    const std::vector<double> init = init_mlp_params(spec, init_seed);
    return add_segment(std::move(info), init);
}

std::size_t ParamStore::add_raw_segment(const std::string& name,
                                        std::span<const double> init_values,
                                        bool trainable) {
    SegmentInfo info;
    info.name = name;
    info.trainable = trainable;
    return add_segment(std::move(info), init_values);
}

bool ParamStore::has_segment(const std::string& name) const {
    return std::any_of(segments_.begin(), segments_.end(),
                       [&](const SegmentInfo& s) { return s.name == name; });
}

const SegmentInfo& ParamStore::segment(const std::string& name) const {
    for (const SegmentInfo& s : segments_)
        if (s.name == name) return s;
    throw ConfigError("unknown parameter segment: " + name);
}

void ParamStore::set_trainable(const std::string& name, bool trainable) {
    for (SegmentInfo& s : segments_)
        if (s.name == name) {
            s.trainable = trainable;
            return;
        }
    throw ConfigError("unknown parameter segment: " + name);
}

std::span<double> ParamStore::values(const std::string& name) {
    const SegmentInfo& s = segment(name);
    return {values_.data() + s.offset, s.length};
}

std::span<const double> ParamStore::values(const std::string& name) const {
    const SegmentInfo& s = segment(name);
    return {values_.data() + s.offset, s.length};
}

std::span<double> ParamStore::grads(const std::string& name) {
    const SegmentInfo& s = segment(name);
    return {grads_.data() + s.offset, s.length};
}

void ParamStore::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
    for (const SegmentInfo& s : segments_) {
        if (!s.trainable) continue;
        for (std::size_t i = s.offset; i < s.offset + s.length; ++i)
            if (!std::isfinite(grads_[i]))
                throw DivergenceError("non-finite gradient in segment '" + s.name +
                                      "'");
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
    for (const SegmentInfo& s : segments_) {
        if (!s.trainable) continue;
        for (std::size_t i = s.offset; i < s.offset + s.length; ++i) {
            const double g = grads_[i];
            adam_m_[i] = beta1 * adam_m_[i] + (1.0 - beta1) * g;
            adam_v_[i] = beta2 * adam_v_[i] + (1.0 - beta2) * g * g;
            const double m_hat = adam_m_[i] / bc1;
            const double v_hat = adam_v_[i] / bc2;
            values_[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
    zero_grads();
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_start,
                 double lr_end) {
    if (total_steps <= 0) throw ConfigError("cosine_lr: total_steps must be positive");
    if (step < 0) step = 0;
    if (step > total_steps) step = total_steps;
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(frac * 3.14159265358979323846));
}

namespace {

constexpr char kMagic[4] = {'F', 'C', 'C', 'K'};

json segment_to_json(const SegmentInfo& s) {
    json j;
    j["name"] = s.name;
    j["length"] = s.length;
    j["trainable"] = s.trainable;
    if (s.mlp) {
        j["kind"] = "mlp";
        j["layer_widths"] = s.mlp->layer_widths;
        j["hidden_activation"] = activation_name(s.mlp->hidden_activation);
        j["output_activation"] = activation_name(s.mlp->output_activation);
    } else {
        j["kind"] = "raw";
    }
    return j;
}

SegmentInfo segment_from_json(const json& j) {
    SegmentInfo s;
    s.name = j.at("name").get<std::string>();
    s.length = j.at("length").get<std::size_t>();
    s.trainable = j.at("trainable").get<bool>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mlp") {
        MlpSpec spec;
        spec.layer_widths = j.at("layer_widths").get<std::vector<int>>();
        spec.hidden_activation =
            activation_from_name(j.at("hidden_activation").get<std::string>());
        spec.output_activation =
            activation_from_name(j.at("output_activation").get<std::string>());
        spec.validate();
        if (spec.param_count() != s.length)
            throw IoError("checkpoint segment '" + s.name +
                          "': length does not match MLP shape");
        s.mlp = std::move(spec);
    } else if (kind != "raw") {
        throw IoError("checkpoint segment '" + s.name + "': unknown kind " + kind);
    }
    return s;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path,
                     const std::string& extra_json) {
    json extra;
    try {
        extra = json::parse(extra_json);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("save_checkpoint: extra_json is not valid JSON: ") +
                          e.what());
    }
    json header;
    header["format"] = "fleetcast-checkpoint";
    header["format_version"] = 2;
    header["adam_step_count"] = store.step_count_;
    header["adam_state"] = true;
    header["segments"] = json::array();
    for (const SegmentInfo& s : store.segments_)
        header["segments"].push_back(segment_to_json(s));
    header["extra"] = std::move(extra);
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    const std::uint32_t head_len = static_cast<std::uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&head_len), 4);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    auto write_block = [&](const std::vector<double>& block) {
        out.write(reinterpret_cast<const char*>(block.data()),
                  static_cast<std::streamsize>(block.size() * sizeof(double)));
    };
    write_block(store.values_);
    write_block(store.adam_m_);
    write_block(store.adam_v_);
    if (!out) throw IoError("failed while writing checkpoint: " + path);
}

struct CheckpointLoader {
    static LoadedCheckpoint run(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open checkpoint: " + path);
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, kMagic, 4) != 0)
            throw IoError("not a checkpoint file (bad magic): " + path);
        std::uint32_t head_len = 0;
        in.read(reinterpret_cast<char*>(&head_len), 4);
        if (!in) throw IoError("truncated checkpoint header: " + path);
        std::string head(head_len, '\0');
        in.read(head.data(), head_len);
        if (!in) throw IoError("truncated checkpoint header: " + path);

        json header;
        try {
            header = json::parse(head);
        } catch (const json::parse_error& e) {
            throw IoError(std::string("corrupt checkpoint header: ") + e.what());
        }
        if (header.at("format").get<std::string>() != "fleetcast-checkpoint")
            throw IoError("unexpected checkpoint format field");
        const int version = header.at("format_version").get<int>();
        if (version != 1 && version != 2)
            throw IoError("unsupported checkpoint format version");
        const bool has_adam = header.value("adam_state", false);

        LoadedCheckpoint result;
        ParamStore& store = result.store;
        std::size_t total = 0;
        for (const json& js : header.at("segments")) {
            SegmentInfo s = segment_from_json(js);
            s.offset = total;
            total += s.length;
            store.segments_.push_back(std::move(s));
        }
        store.values_.resize(total);
        store.grads_.assign(total, 0.0);
        store.adam_m_.assign(total, 0.0);
        store.adam_v_.assign(total, 0.0);
        store.step_count_ = header.value("adam_step_count", std::int64_t{0});
        auto read_block = [&](std::vector<double>& block, const char* what) {
            in.read(reinterpret_cast<char*>(block.data()),
                    static_cast<std::streamsize>(total * sizeof(double)));
            if (in.gcount() != static_cast<std::streamsize>(total * sizeof(double)))
                throw IoError(std::string("checkpoint ") + what +
                              " block is truncated: " + path);
        };
        read_block(store.values_, "value");
        if (has_adam) {
            read_block(store.adam_m_, "adam-m");
            read_block(store.adam_v_, "adam-v");
        }
        result.extra_json = header.at("extra").dump();
        return result;
    }
};

LoadedCheckpoint load_checkpoint(const std::string& path) {
    return CheckpointLoader::run(path);
}

}  // namespace fleetcast
