#pragma once

// Online/target training loop: Adam on the online network, cosine-scheduled
// exponential moving average into the target network.

#include <cmath>
#include <vector>

#include "sspd/augment.hpp"
#include "sspd/loss.hpp"
#include "sspd/model.hpp"

namespace sspd::distill {

using nn::Param;

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class S>
struct Adam {
    AdamConfig cfg;
    std::vector<nn::Vx<S>> m_, v_;
    long long step_ = 0;

    void attach(const std::vector<Param<S>*>& params) {
        m_.clear();
        v_.clear();
        for (auto* p : params) {
            m_.push_back(nn::Vx<S>::Zero(p->value.size()));
            v_.push_back(nn::Vx<S>::Zero(p->value.size()));
        }
    }

    void step(const std::vector<Param<S>*>& params) {
        ++step_;
        const S bc1 = S(1) - static_cast<S>(std::pow(cfg.beta1, step_));
        const S bc2 = S(1) - static_cast<S>(std::pow(cfg.beta2, step_));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = *params[i];
            Eigen::Map<nn::Vx<S>> w(p.value.data(), p.value.size());
            Eigen::Map<const nn::Vx<S>> g(p.grad.data(), p.grad.size());
            m_[i] = static_cast<S>(cfg.beta1) * m_[i] + (S(1) - static_cast<S>(cfg.beta1)) * g;
            v_[i] = static_cast<S>(cfg.beta2) * v_[i] +
                    (S(1) - static_cast<S>(cfg.beta2)) * g.cwiseProduct(g);
            w -= static_cast<S>(cfg.lr) *
                 ((m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + static_cast<S>(cfg.eps)))
                     .matrix();
        }
    }
};

// Momentum rises from rho_start to rho_end on a cosine over total_steps.
struct MomentumSchedule {
    double rho_start = 0.9;
    double rho_end = 1.0;
    long long total_steps = 1;

    double at(long long t) const {
        if (total_steps <= 0) return rho_end;
        const double clamped = std::min<double>(static_cast<double>(t), total_steps);
        return rho_end -
               (rho_end - rho_start) * (1.0 + std::cos(M_PI * clamped / total_steps)) / 2.0;
    }
};

// target <- rho * target + (1 - rho) * online, parameter by parameter.
template <class S>
void ema_update(const std::vector<Param<S>*>& online, const std::vector<Param<S>*>& target,
                double rho) {
    if (online.size() != target.size()) throw ShapeError("network parameter lists disagree");
    const S r = static_cast<S>(rho);
    for (size_t i = 0; i < online.size(); ++i) {
        if (online[i]->value.size() != target[i]->value.size()) {
            throw ShapeError("parameter shapes disagree: " + online[i]->name);
        }
        target[i]->value = r * target[i]->value + (S(1) - r) * online[i]->value;
    }
}

template <class S>
struct TrainState {
    model::Network<S> online;
    model::Network<S> target;
    Adam<S> opt;
    MomentumSchedule momentum;
    long long step = 0;           // optimizer steps taken
    long long momentum_clock = 0; // schedule position (epoch index)

    void init(const model::ModelConfig& cfg, const AdamConfig& adam, const MomentumSchedule& mom) {
        online.init(cfg);
        target.init(cfg);
        // Target starts as an exact copy of the online network.
        auto po = online.params();
        auto pt = target.params();
        for (size_t i = 0; i < po.size(); ++i) pt[i]->value = po[i]->value;
        opt.cfg = adam;
        opt.attach(po);
        momentum = mom;
        step = 0;
    }
};

struct StepStats {
    loss::LossBreakdown losses;  // batch means
    double rho = 0;
};

// Converts a planar float clip of frame differences into a training tensor.
template <class S>
nn::Tens<S> to_tens(const VideoClip& clip) {
    nn::Tens<S> t = nn::Tens<S>::zeros(clip.frames, 3, clip.height, clip.width);
    const int plane = clip.height * clip.width;
    for (int f = 0; f < clip.frames; ++f) {
        for (int c = 0; c < 3; ++c) {
            const float* src = clip.data.data() + (static_cast<size_t>(f) * 3 + c) * plane;
            S* dst = t.d.data() + ((static_cast<size_t>(f) * 3 + c) * plane);
            for (int i = 0; i < plane; ++i) dst[i] = static_cast<S>(src[i]);
        }
    }
    return t;
}

// One optimization step over a batch of clips. Each clip is augmented into a
// local/global view pair, turned into frame differences with the local
// differences element-masked, then pushed through online (masked local) and
// target (global) networks. Gradients are averaged over the batch.
template <class S>
StepStats train_step(TrainState<S>& state, const std::vector<VideoClip>& batch,
                     const augment::AugmentConfig& aug, const loss::LossWeights& weights,
                     Rng& rng) {
    if (batch.empty()) throw ShapeError("empty training batch");
    state.online.zero_grad();
    StepStats stats;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& clip : batch) {
        Rng clip_rng = rng.fork(static_cast<uint64_t>(state.step) * 1000003 +
                                static_cast<uint64_t>(&clip - batch.data()));
        augment::ViewPair views =
            augment::local_global_views(augment::preprocess_clip(clip), aug, clip_rng);
        augment::DifferencePair diffs =
            augment::masked_difference(views, aug, clip_rng);

        nn::Tens<S> local = to_tens<S>(diffs.masked);
        nn::Tens<S> global = to_tens<S>(diffs.original);
        model::NetworkOutputs<S> out_t = state.target.forward(std::move(global), false);
        model::NetworkOutputs<S> out_o = state.online.forward(std::move(local), true);

        loss::ClipGrads<S> grads = loss::ClipGrads<S>::zeros_like(out_o);
        loss::LossBreakdown b = loss::clip_loss(out_o, out_t, clip.fs, weights, grads);
        // Scale the clip gradient by 1/N before backprop so parameter grads
        // accumulate to the batch mean.
        grads.g_rppg *= static_cast<S>(inv_n);
        for (auto& g : grads.g_maps) g *= static_cast<S>(inv_n);
        for (auto& g : grads.g_waves) g *= static_cast<S>(inv_n);
        state.online.backward(grads.g_rppg, grads.g_maps, grads.g_waves);

        stats.losses.tspd += b.tspd * inv_n;
        stats.losses.rpd += b.rpd * inv_n;
        stats.losses.sd += b.sd * inv_n;
        stats.losses.snr += b.snr * inv_n;
        stats.losses.total += b.total * inv_n;
    }
    auto po = state.online.params();
    state.opt.step(po);
    stats.rho = state.momentum.at(state.momentum_clock);
    ema_update(po, state.target.params(), stats.rho);
    ++state.step;
    return stats;
}

}  // namespace sspd::distill
