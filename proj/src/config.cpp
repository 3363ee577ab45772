#include "sspd/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sspd::config {

void RunConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (lr <= 0) throw ConfigError("lr must be positive");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (clip_train_s <= 0 || clip_eval_s <= 0) throw ConfigError("clip lengths must be positive");
    if (input < 16) throw ConfigError("input must be >= 16");
    if (preprocess < input) throw ConfigError("preprocess must be >= input");
    if (mask_p < 0 || mask_p >= 1) throw ConfigError("mask_p must lie in [0, 1)");
    if (alpha < 0 || beta < 0) throw ConfigError("loss weights must be non-negative");
    if (epsilon <= 0) throw ConfigError("epsilon must be positive");
    if (rho_start < 0 || rho_start > 1 || rho_end < 0 || rho_end > 1 || rho_end < rho_start) {
        throw ConfigError("momentum schedule must satisfy 0 <= rho_start <= rho_end <= 1");
    }
    if (s3m_depth < 1) throw ConfigError("s3m_depth must be >= 1");
    if (static_cast<int>(windows.size()) < s3m_depth) {
        throw ConfigError("windows must list one entry per pyramid layer");
    }
    if (heads < 1) throw ConfigError("heads must be >= 1");
    if (crop_scale_min <= 0 || crop_scale_max > 1 || crop_scale_min > crop_scale_max) {
        throw ConfigError("crop scale range must satisfy 0 < min <= max <= 1");
    }
    if (flip_prob < 0 || flip_prob > 1) throw ConfigError("flip_prob must lie in [0, 1]");
    if (noise_std < 0) throw ConfigError("noise_std must be non-negative");
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
    std::string body = v;
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') throw ConfigError("unterminated list for key " + key);
        body = body.substr(1, body.size() - 2);
    }
    std::vector<int> out;
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError("non-integer list entry for key " + key);
        }
    }
    if (out.empty()) throw ConfigError("empty list for key " + key);
    return out;
}

template <class T, class F>
T parse_scalar(const std::string& v, const std::string& key, F conv) {
    try {
        size_t pos = 0;
        T out = conv(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad value for key " + key + ": " + v);
    }
}

int to_int(const std::string& v, const std::string& key) {
    return parse_scalar<int>(v, key, [](const std::string& s, size_t* p) { return std::stoi(s, p); });
}

double to_double(const std::string& v, const std::string& key) {
    return parse_scalar<double>(v, key,
                                [](const std::string& s, size_t* p) { return std::stod(s, p); });
}

uint64_t to_u64(const std::string& v, const std::string& key) {
    return parse_scalar<uint64_t>(
        v, key, [](const std::string& s, size_t* p) { return std::stoull(s, p); });
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("bad boolean for key " + key + ": " + v);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + " is not key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "epochs") cfg.epochs = to_int(val, key);
        else if (key == "lr") cfg.lr = to_double(val, key);
        else if (key == "batch") cfg.batch = to_int(val, key);
        else if (key == "clip_train_s") cfg.clip_train_s = to_double(val, key);
        else if (key == "clip_eval_s") cfg.clip_eval_s = to_double(val, key);
        else if (key == "input") cfg.input = to_int(val, key);
        else if (key == "preprocess") cfg.preprocess = to_int(val, key);
        else if (key == "mask_p") cfg.mask_p = to_double(val, key);
        else if (key == "alpha") cfg.alpha = to_double(val, key);
        else if (key == "beta") cfg.beta = to_double(val, key);
        else if (key == "epsilon") cfg.epsilon = to_double(val, key);
        else if (key == "rho_start") cfg.rho_start = to_double(val, key);
        else if (key == "rho_end") cfg.rho_end = to_double(val, key);
        else if (key == "s3m_depth") cfg.s3m_depth = to_int(val, key);
        else if (key == "windows") cfg.windows = parse_int_list(val, key);
        else if (key == "heads") cfg.heads = to_int(val, key);
        else if (key == "half_pool_tokenizer") cfg.half_pool_tokenizer = to_bool(val, key);
        else if (key == "crop_scale_min") cfg.crop_scale_min = to_double(val, key);
        else if (key == "crop_scale_max") cfg.crop_scale_max = to_double(val, key);
        else if (key == "flip_prob") cfg.flip_prob = to_double(val, key);
        else if (key == "noise_std") cfg.noise_std = to_double(val, key);
        else if (key == "seed") cfg.seed = to_u64(val, key);
        else throw ConfigError("unknown config key: " + key);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "epochs = " << cfg.epochs << "\n";
    out << "lr = " << cfg.lr << "\n";
    out << "batch = " << cfg.batch << "\n";
    out << "clip_train_s = " << cfg.clip_train_s << "\n";
    out << "clip_eval_s = " << cfg.clip_eval_s << "\n";
    out << "input = " << cfg.input << "\n";
    out << "preprocess = " << cfg.preprocess << "\n";
    out << "mask_p = " << cfg.mask_p << "\n";
    out << "alpha = " << cfg.alpha << "\n";
    out << "beta = " << cfg.beta << "\n";
    out << "epsilon = " << cfg.epsilon << "\n";
    out << "rho_start = " << cfg.rho_start << "\n";
    out << "rho_end = " << cfg.rho_end << "\n";
    out << "s3m_depth = " << cfg.s3m_depth << "\n";
    out << "windows = [";
    for (size_t i = 0; i < cfg.windows.size(); ++i) {
        if (i) out << ", ";
        out << cfg.windows[i];
    }
    out << "]\n";
    out << "heads = " << cfg.heads << "\n";
    out << "half_pool_tokenizer = " << (cfg.half_pool_tokenizer ? "true" : "false") << "\n";
    out << "crop_scale_min = " << cfg.crop_scale_min << "\n";
    out << "crop_scale_max = " << cfg.crop_scale_max << "\n";
    out << "flip_prob = " << cfg.flip_prob << "\n";
    out << "noise_std = " << cfg.noise_std << "\n";
    out << "seed = " << cfg.seed << "\n";
    return out.str();
}

uint64_t resolve_seed(long long explicit_seed) {
    if (explicit_seed >= 0) return static_cast<uint64_t>(explicit_seed);
    if (const char* env = std::getenv("SSPD_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("SSPD_SEED is not a non-negative integer");
        }
    }
    return 1;
}

}  // namespace sspd::config
