#pragma once

// Binary checkpoint format "sspd-ckpt-v1": 8-byte magic, uint32 header
// length, JSON header (model config, epoch, optimizer step, tensor table),
// then raw little-endian float32 payloads in table order.

#include <filesystem>
#include <string>

#include "sspd/distill.hpp"
#include "sspd/model.hpp"

namespace sspd::ckpt {

struct Meta {
    model::ModelConfig config;
    int epoch = 0;
    long long opt_step = 0;
    double momentum_rho = 0;
};

void save(const std::filesystem::path& path, distill::TrainState<float>& state, int epoch);

// Rebuilds both networks and the optimizer moments from disk.
Meta load(const std::filesystem::path& path, distill::TrainState<float>& state);

// Loads only the config + target network weights (for inference/eval).
Meta load_inference(const std::filesystem::path& path, model::Network<float>& net);

}  // namespace sspd::ckpt
