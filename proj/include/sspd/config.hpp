#pragma once

// Flat key=value run configuration (TOML-compatible scalars). Every setting
// has a default; unknown keys are rejected so typos fail loudly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sspd/errors.hpp"

namespace sspd::config {

struct RunConfig {
    int epochs = 50;
    double lr = 1e-3;
    int batch = 8;
    double clip_train_s = 10.0;
    double clip_eval_s = 30.0;
    int input = 128;
    int preprocess = 151;
    double mask_p = 0.3;
    double alpha = 0.8;    // SD regularizer weight
    double beta = 0.6;     // SNR regularizer weight
    double epsilon = 0.05; // SD decay scale
    double rho_start = 0.9;
    double rho_end = 1.0;
    int s3m_depth = 3;
    std::vector<int> windows = {9, 7, 5};
    int heads = 4;
    bool half_pool_tokenizer = false;
    double crop_scale_min = 0.7;
    double crop_scale_max = 1.0;
    double flip_prob = 0.5;
    double noise_std = 0.02;
    uint64_t seed = 1;

    void validate() const;
};

// Parses key = value lines ('#' comments allowed). Missing keys keep their
// defaults; unknown keys raise ConfigError naming the key.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);

// Effective-config dump, re-parseable by load_config.
std::string dump_config(const RunConfig& cfg);

// Seed fallback: explicit value if >= 0, else SSPD_SEED env var, else 1.
uint64_t resolve_seed(long long explicit_seed);

}  // namespace sspd::config
