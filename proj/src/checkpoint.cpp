#include "derain/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "derain/config.hpp"
#include "derain/errors.hpp"

namespace derain {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'N', 'C', 'K', 'P', 'T', '1'};

struct TensorEntry {
    std::string name;
    std::vector<int> shape;
    uint64_t offset = 0;  // in floats
    uint64_t count = 0;
};

void to_json(json& j, const TensorEntry& t) {
    j = json{{"name", t.name}, {"shape", t.shape}, {"offset", t.offset}, {"count", t.count}};
}
void from_json(const json& j, TensorEntry& t) {
    j.at("name").get_to(t.name);
    j.at("shape").get_to(t.shape);
    j.at("offset").get_to(t.offset);
    j.at("count").get_to(t.count);
}

struct RawCheckpoint {
    json header;
    std::vector<float> payload;
};

void write_file(const std::string& path, const json& header, const std::vector<float>& payload) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    const std::string h = header.dump();
    const uint64_t hlen = h.size();
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

RawCheckpoint read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a checkpoint file: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string h(hlen, '\0');
    in.read(h.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw DataError("truncated checkpoint header: " + path);
    RawCheckpoint raw;
    try {
        raw.header = json::parse(h);
    } catch (const json::exception& e) {
        throw DataError("corrupt checkpoint header in " + path + ": " + e.what());
    }
    uint64_t total = 0;
    for (const auto& t : raw.header.at("tensors").get<std::vector<TensorEntry>>())
        total += t.count;
    if (raw.header.contains("adam") && !raw.header.at("adam").is_null()) {
        for (const char* key : {"m", "v"})
            for (const auto& t : raw.header.at("adam").at(key).get<std::vector<TensorEntry>>())
                total += t.count;
    }
    raw.payload.resize(total);
    in.read(reinterpret_cast<char*>(raw.payload.data()),
            static_cast<std::streamsize>(total * sizeof(float)));
    if (!in) throw DataError("truncated checkpoint payload: " + path);
    return raw;
}

json build_header(const std::string& kind, const nn::NetworkConfig& cfg, bool shared,
                  int stage_count, int64_t train_step, const std::string& hash,
                  std::vector<nn::ParamRef<float>>& params, nn::Adam<float>* adam,
                  std::vector<float>& payload) {
    std::vector<TensorEntry> tensors;
    uint64_t offset = 0;
    for (auto& p : params) {
        TensorEntry t{p.name, p.shape, offset, p.value->size()};
        payload.insert(payload.end(), p.value->begin(), p.value->end());
        offset += t.count;
        tensors.push_back(std::move(t));
    }
    json header{{"schema_version", 1},
                {"kind", kind},
                {"network", cfg},
                {"shared_stages", shared},
                {"stage_count", stage_count},
                {"train_step", train_step},
                {"config_hash", hash},
                {"tensors", tensors}};
    if (adam) {
        std::vector<TensorEntry> ms, vs;
        auto& attached = adam->attached();
        for (size_t k = 0; k < attached.size(); ++k) {
            auto& m = adam->moments_m()[k];
            auto& v = adam->moments_v()[k];
            ms.push_back({attached[k].name, attached[k].shape, offset, m.size()});
            payload.insert(payload.end(), m.begin(), m.end());
            offset += m.size();
            vs.push_back({attached[k].name, attached[k].shape, offset, v.size()});
            payload.insert(payload.end(), v.begin(), v.end());
            offset += v.size();
        }
        header["adam"] = json{{"config", adam->config()},
                              {"step", adam->step_count()},
                              {"m", ms},
                              {"v", vs}};
    } else {
        header["adam"] = nullptr;
    }
    return header;
}

void assign_tensors(const RawCheckpoint& raw, std::vector<nn::ParamRef<float>> params,
                    const std::string& path) {
    const auto entries = raw.header.at("tensors").get<std::vector<TensorEntry>>();
    std::map<std::string, const TensorEntry*> index;
    for (const auto& t : entries) index[t.name] = &t;
    for (auto& p : params) {
        auto it = index.find(p.name);
        if (it == index.end())
            throw DataError("checkpoint " + path + " is missing tensor " + p.name);
        if (it->second->count != p.value->size())
            throw DataError("checkpoint tensor size mismatch for " + p.name + " in " + path);
        std::copy(raw.payload.begin() + static_cast<ptrdiff_t>(it->second->offset),
                  raw.payload.begin() + static_cast<ptrdiff_t>(it->second->offset +
                                                               it->second->count),
                  p.value->begin());
    }
}

}  // namespace

std::vector<nn::ParamRef<float>> DerainModel::all_params() {
    std::vector<nn::ParamRef<float>> out;
    for (size_t t = 0; t < stages.size(); ++t) {
        for (auto& p : stages[t].params()) {
            p.name = "stage" + std::to_string(t) + "/" + p.name;
            out.push_back(p);
        }
    }
    return out;
}

DerainModel make_derain_model(const nn::NetworkConfig& cfg, int stage_count,
                              bool shared_stages, uint64_t seed) {
    if (stage_count < 1) throw ConfigError("stage_count must be >= 1");
    DerainModel m;
    m.config = cfg;
    m.shared_stages = shared_stages;
    const int n = shared_stages ? 1 : stage_count;
    for (int t = 0; t < n; ++t)
        m.stages.emplace_back(cfg, Rng::derive(seed, static_cast<uint64_t>(t)));
    return m;
}

DehazeModel make_dehaze_model(const nn::NetworkConfig& cfg, uint64_t seed) {
    DehazeModel m;
    m.net = nn::DehazeNet<float>(cfg, seed);
    m.config = m.net.config();
    return m;
}

void save_derain_checkpoint(const std::string& path, DerainModel& model,
                            nn::Adam<float>* adam) {
    auto params = model.all_params();
    std::vector<float> payload;
    json header = build_header("derain", model.config, model.shared_stages,
                               static_cast<int>(model.stages.size()), model.train_step,
                               model.config_hash, params, adam, payload);
    write_file(path, header, payload);
}

void save_dehaze_checkpoint(const std::string& path, DehazeModel& model,
                            nn::Adam<float>* adam) {
    auto params = model.net.params();
    std::vector<float> payload;
    json header = build_header("dehaze", model.config, true, 1, model.train_step,
                               model.config_hash, params, adam, payload);
    write_file(path, header, payload);
}

DerainModel load_derain_model(const std::string& path) {
    RawCheckpoint raw = read_file(path);
    if (raw.header.at("kind").get<std::string>() != "derain")
        throw ConfigError("checkpoint " + path + " is not a derain model");
    nn::NetworkConfig cfg = raw.header.at("network").get<nn::NetworkConfig>();
    const bool shared = raw.header.at("shared_stages").get<bool>();
    const int stage_count = raw.header.at("stage_count").get<int>();
    DerainModel model = make_derain_model(cfg, shared ? 1 : stage_count, shared, 0);
    model.train_step = raw.header.at("train_step").get<int64_t>();
    model.config_hash = raw.header.value("config_hash", "");
    assign_tensors(raw, model.all_params(), path);
    return model;
}

DehazeModel load_dehaze_model(const std::string& path) {
    RawCheckpoint raw = read_file(path);
    if (raw.header.at("kind").get<std::string>() != "dehaze")
        throw ConfigError("checkpoint " + path + " is not a dehaze model");
    nn::NetworkConfig cfg = raw.header.at("network").get<nn::NetworkConfig>();
    DehazeModel model = make_dehaze_model(cfg, 0);
    model.train_step = raw.header.at("train_step").get<int64_t>();
    model.config_hash = raw.header.value("config_hash", "");
    assign_tensors(raw, model.net.params(), path);
    return model;
}

bool restore_adam_state(const std::string& path, nn::Adam<float>& adam) {
    RawCheckpoint raw = read_file(path);
    if (!raw.header.contains("adam") || raw.header.at("adam").is_null()) return false;
    const json& a = raw.header.at("adam");
    auto ms = a.at("m").get<std::vector<TensorEntry>>();
    auto vs = a.at("v").get<std::vector<TensorEntry>>();
    auto& attached = adam.attached();
    if (ms.size() != attached.size() || vs.size() != attached.size())
        throw DataError("optimizer state in " + path + " does not match the model");
    for (size_t k = 0; k < attached.size(); ++k) {
        if (ms[k].name != attached[k].name || ms[k].count != attached[k].value->size())
            throw DataError("optimizer tensor mismatch for " + attached[k].name);
        std::copy(raw.payload.begin() + static_cast<ptrdiff_t>(ms[k].offset),
                  raw.payload.begin() + static_cast<ptrdiff_t>(ms[k].offset + ms[k].count),
                  adam.moments_m()[k].begin());
        std::copy(raw.payload.begin() + static_cast<ptrdiff_t>(vs[k].offset),
                  raw.payload.begin() + static_cast<ptrdiff_t>(vs[k].offset + vs[k].count),
                  adam.moments_v()[k].begin());
    }
    adam.set_step_count(a.at("step").get<int64_t>());
    return true;
}

std::string checkpoint_kind(const std::string& path) {
    RawCheckpoint raw = read_file(path);
    return raw.header.at("kind").get<std::string>();
}

}  // namespace derain
