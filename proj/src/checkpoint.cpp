#include "sspd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace sspd::ckpt {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'s', 's', 'p', 'd', 'c', 'k', 'p', '1'};

json config_to_json(const model::ModelConfig& c) {
    json j;
    j["backbone"]["in_channels"] = c.backbone.in_channels;
    j["backbone"]["block_channels"] = c.backbone.block_channels;
    j["backbone"]["temporal_kernel"] = c.backbone.temporal_kernel;
    j["backbone"]["input_size"] = c.backbone.input_size;
    j["predictor"]["hidden"] = c.predictor.hidden;
    j["predictor"]["kernel"] = c.predictor.kernel;
    j["s3m"]["depth"] = c.s3m.depth;
    j["s3m"]["windows"] = c.s3m.windows;
    j["s3m"]["heads"] = c.s3m.heads;
    j["s3m"]["half_pool_tokenizer"] = c.s3m.half_pool_tokenizer;
    j["init_seed"] = c.init_seed;
    return j;
}

model::ModelConfig config_from_json(const json& j) {
    model::ModelConfig c;
    c.backbone.in_channels = j.at("backbone").at("in_channels").get<int>();
    c.backbone.block_channels = j.at("backbone").at("block_channels").get<std::vector<int>>();
    c.backbone.temporal_kernel = j.at("backbone").at("temporal_kernel").get<int>();
    c.backbone.input_size = j.at("backbone").at("input_size").get<int>();
    c.predictor.hidden = j.at("predictor").at("hidden").get<int>();
    c.predictor.kernel = j.at("predictor").at("kernel").get<int>();
    c.s3m.depth = j.at("s3m").at("depth").get<int>();
    c.s3m.windows = j.at("s3m").at("windows").get<std::vector<int>>();
    c.s3m.heads = j.at("s3m").at("heads").get<int>();
    c.s3m.half_pool_tokenizer = j.at("s3m").at("half_pool_tokenizer").get<bool>();
    c.init_seed = j.at("init_seed").get<uint64_t>();
    return c;
}

void write_blob(std::ofstream& out, const float* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
}

void read_blob(std::ifstream& in, float* p, size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw IoError("truncated checkpoint payload");
}

struct Entry {
    std::string name;
    size_t count;
};

}  // namespace

void save(const std::filesystem::path& path, distill::TrainState<float>& state, int epoch) {
    auto po = state.online.params();
    auto pt = state.target.params();
    json tensors = json::array();
    for (auto* p : po) {
        tensors.push_back({{"name", "online." + p->name}, {"count", p->value.size()}});
    }
    for (auto* p : pt) {
        tensors.push_back({{"name", "target." + p->name}, {"count", p->value.size()}});
    }
    for (size_t i = 0; i < po.size(); ++i) {
        tensors.push_back({{"name", "adam.m." + po[i]->name}, {"count", state.opt.m_[i].size()}});
        tensors.push_back({{"name", "adam.v." + po[i]->name}, {"count", state.opt.v_[i].size()}});
    }
    json header;
    header["format"] = "sspd-ckpt-v1";
    header["config"] = config_to_json(state.online.cfg);
    header["epoch"] = epoch;
    header["opt_step"] = state.opt.step_;
    header["train_step"] = state.step;
    header["momentum_clock"] = state.momentum_clock;
    header["momentum"] = {{"rho_start", state.momentum.rho_start},
                          {"rho_end", state.momentum.rho_end},
                          {"total_steps", state.momentum.total_steps}};
    header["tensors"] = tensors;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, 8);
    const uint32_t hlen = static_cast<uint32_t>(hs.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (auto* p : po) write_blob(out, p->value.data(), p->value.size());
    for (auto* p : pt) write_blob(out, p->value.data(), p->value.size());
    for (size_t i = 0; i < po.size(); ++i) {
        write_blob(out, state.opt.m_[i].data(), state.opt.m_[i].size());
        write_blob(out, state.opt.v_[i].data(), state.opt.v_[i].size());
    }
    if (!out) throw IoError("failed writing " + path.string());
}

namespace {

json read_header(std::ifstream& in, const std::filesystem::path& path) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw ParseError("not an sspd-ckpt-v1 file: " + path.string());
    }
    uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    if (!in) throw IoError("truncated checkpoint header in " + path.string());
    try {
        return json::parse(hs);
    } catch (const std::exception& e) {
        throw ParseError("bad checkpoint header: " + std::string(e.what()));
    }
}

}  // namespace

Meta load(const std::filesystem::path& path, distill::TrainState<float>& state) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json header = read_header(in, path);
    Meta meta;
    meta.config = config_from_json(header.at("config"));
    meta.epoch = header.value("epoch", 0);
    meta.opt_step = header.value("opt_step", 0LL);

    distill::MomentumSchedule mom;
    const auto& jm = header.at("momentum");
    mom.rho_start = jm.at("rho_start").get<double>();
    mom.rho_end = jm.at("rho_end").get<double>();
    mom.total_steps = jm.at("total_steps").get<long long>();
    state.init(meta.config, state.opt.cfg, mom);
    state.step = header.value("train_step", 0LL);
    state.momentum_clock = header.value("momentum_clock", 0LL);
    state.opt.step_ = meta.opt_step;
    meta.momentum_rho = mom.at(state.momentum_clock);

    auto po = state.online.params();
    auto pt = state.target.params();
    for (auto* p : po) read_blob(in, p->value.data(), p->value.size());
    for (auto* p : pt) read_blob(in, p->value.data(), p->value.size());
    for (size_t i = 0; i < po.size(); ++i) {
        read_blob(in, state.opt.m_[i].data(), state.opt.m_[i].size());
        read_blob(in, state.opt.v_[i].data(), state.opt.v_[i].size());
    }
    return meta;
}

Meta load_inference(const std::filesystem::path& path, model::Network<float>& net) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json header = read_header(in, path);
    Meta meta;
    meta.config = config_from_json(header.at("config"));
    meta.epoch = header.value("epoch", 0);
    net.init(meta.config);
    auto pt = net.params();
    // Skip the online block, then read the target weights.
    size_t online_bytes = 0;
    for (auto* p : pt) online_bytes += p->value.size() * sizeof(float);
    in.seekg(static_cast<std::streamoff>(online_bytes), std::ios::cur);
    for (auto* p : pt) read_blob(in, p->value.data(), p->value.size());
    return meta;
}

}  // namespace sspd::ckpt
