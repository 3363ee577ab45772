#pragma once

// The self-similarity-aware network: spatio-temporal backbone, gradient-
// stopped rPPG predictor, and the separable stack of temporal-similarity
// blocks used only during training.

#include <memory>
#include <vector>

#include "sspd/nn.hpp"

namespace sspd::model {

using nn::Mx;
using nn::Param;
using nn::Tens;
using nn::Vx;

struct BackboneConfig {
    int in_channels = 3;
    std::vector<int> block_channels = {32, 64, 128, 256};
    int temporal_kernel = 3;
    int input_size = 128;  // spatial; halved once per block

    int feature_dim() const { return block_channels.back(); }
    int output_spatial() const {
        int s = input_size;
        for (size_t i = 0; i < block_channels.size(); ++i) s = (s + 1) / 2;
        return s;
    }
};

struct PredictorConfig {
    int hidden = 64;
    int kernel = 5;
};

struct S3mConfig {
    int depth = 3;
    std::vector<int> windows = {9, 7, 5};  // L4 appends 3
    int heads = 4;
    bool half_pool_tokenizer = false;  // ablation: halve the time scale per block

    void validate() const {
        if (depth < 1) throw ConfigError("s3m depth must be >= 1");
        if (static_cast<int>(windows.size()) < depth) {
            throw ConfigError("s3m needs one window per block");
        }
        for (int i = 0; i < depth; ++i) {
            if (windows[i] < 3 || windows[i] % 2 == 0) {
                throw ConfigError("token windows must be odd and >= 3");
            }
        }
    }
};

struct ModelConfig {
    BackboneConfig backbone;
    PredictorConfig predictor;
    S3mConfig s3m;
    uint64_t init_seed = 1;
};

// One pyramid layer: (SSM, SSW) from the projected tokens of a TS block.
template <class S>
struct PyramidLayer {
    Mx<S> map;
    Vx<S> wave;
};

template <class S>
using TemporalSimilarityPyramid = std::vector<PyramidLayer<S>>;

template <class S>
struct ConvBlock {
    nn::SpatialConv<S> sconv;  // 3x3, stride 2
    nn::ChannelNorm<S> norm1;
    nn::TemporalConv<S> tconv;  // k x 1 x 1, same padding
    nn::ChannelNorm<S> norm2;
    nn::Relu<S> relu;

    // Cached activations for backward (freed by backward()).
    Tens<S> in_, a1_, r1_, a2_, r2_;

    void init(const std::string& name, int cin, int cout, int k, Rng& rng) {
        sconv.init(name + ".sconv", cin, cout, 2, rng);
        norm1.init(name + ".norm1", cout);
        tconv.init(name + ".tconv", cout, cout, k, true, rng);
        norm2.init(name + ".norm2", cout);
    }

    Tens<S> forward(Tens<S> in, bool keep) {
        Tens<S> a1 = sconv.forward(in);
        Tens<S> r1 = relu.forward(norm1.forward(a1));
        Tens<S> a2 = tconv.forward(r1);
        Tens<S> out = relu.forward(norm2.forward(a2));
        if (keep) {
            in_ = std::move(in);
            a1_ = std::move(a1);
            r1_ = std::move(r1);
            a2_ = std::move(a2);
            r2_ = out;  // copy: out is returned to the caller
        }
        return out;
    }

    Tens<S> backward(const Tens<S>& gout) {
        Tens<S> g = relu.backward(r2_, gout);
        g = norm2.backward(a2_, g);
        g = tconv.backward(r1_, g);
        g = relu.backward(r1_, g);
        g = norm1.backward(a1_, g);
        g = sconv.backward(in_, g);
        in_ = {};
        a1_ = {};
        r1_ = {};
        a2_ = {};
        r2_ = {};
        return g;
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&sconv.w);
        out.push_back(&sconv.b);
        out.push_back(&norm1.gamma);
        out.push_back(&norm1.beta);
        out.push_back(&tconv.w);
        out.push_back(&tconv.b);
        out.push_back(&norm2.gamma);
        out.push_back(&norm2.beta);
    }
};

template <class S>
struct Backbone {
    BackboneConfig cfg;
    std::vector<ConvBlock<S>> blocks;
    Tens<S> final_map_;  // pre-GAP map kept for token backward

    void init(const BackboneConfig& c, Rng& rng) {
        cfg = c;
        blocks.resize(cfg.block_channels.size());
        int cin = cfg.in_channels;
        for (size_t i = 0; i < blocks.size(); ++i) {
            blocks[i].init("backbone.block" + std::to_string(i), cin, cfg.block_channels[i],
                           cfg.temporal_kernel, rng);
            cin = cfg.block_channels[i];
        }
    }

    // Returns (pre-GAP feature map, T x C token matrix).
    std::pair<Tens<S>, Mx<S>> forward(Tens<S> in, bool keep) {
        if (in.c != cfg.in_channels || in.h != cfg.input_size || in.w != cfg.input_size) {
            throw ShapeError("backbone input must be T x " + std::to_string(cfg.in_channels) +
                             " x " + std::to_string(cfg.input_size) + " x " +
                             std::to_string(cfg.input_size));
        }
        Tens<S> x = std::move(in);
        for (auto& b : blocks) x = b.forward(std::move(x), keep);
        Mx<S> tokens = nn::SpatialGap<S>::forward(x);
        if (keep) final_map_ = x;
        return {std::move(x), std::move(tokens)};
    }

    void backward(const Mx<S>& g_tokens) {
        Tens<S> g = nn::SpatialGap<S>::backward(final_map_, g_tokens);
        final_map_ = {};
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) g = it->backward(g);
    }

    void collect(std::vector<Param<S>*>& out) {
        for (auto& b : blocks) b.collect(out);
    }
};

// Spatial aggregation then two temporal convolutions down to one channel.
// Sits behind a stop-gradient: its backward never reaches the backbone.
template <class S>
struct Predictor {
    PredictorConfig cfg;
    int in_dim = 0;
    nn::TemporalConv<S> conv1, conv2;
    nn::Relu<S> relu;
    Tens<S> tok_, a1_, r1_;

    void init(const PredictorConfig& c, int feature_dim, Rng& rng) {
        cfg = c;
        in_dim = feature_dim;
        conv1.init("predictor.conv1", feature_dim, cfg.hidden, cfg.kernel, true, rng);
        conv2.init("predictor.conv2", cfg.hidden, 1, cfg.kernel, true, rng);
    }

    Vx<S> forward(const Tens<S>& feature_map, bool keep) {
        if (feature_map.c != in_dim) throw ShapeError("predictor feature dim mismatch");
        Mx<S> tok_mat = nn::SpatialGap<S>::forward(feature_map);
        Tens<S> tok = Tens<S>::zeros(static_cast<int>(tok_mat.rows()), in_dim, 1, 1);
        for (int t = 0; t < tok.t; ++t) tok.fmat(t) = tok_mat.row(t);
        Tens<S> a1 = conv1.forward(tok);
        Tens<S> r1 = relu.forward(a1);
        Tens<S> out = conv2.forward(r1);
        Vx<S> y(out.t);
        for (int t = 0; t < out.t; ++t) y[t] = out.d[t];
        if (keep) {
            tok_ = std::move(tok);
            a1_ = std::move(a1);
            r1_ = std::move(r1);
        }
        return y;
    }

    void backward(const Vx<S>& gy) {
        Tens<S> g = Tens<S>::zeros(static_cast<int>(gy.size()), 1, 1, 1);
        for (int t = 0; t < g.t; ++t) g.d[t] = gy[t];
        g = conv2.backward(r1_, g);
        g = relu.backward(r1_, g);
        conv1.backward(tok_, g);  // input gradient discarded: stop-gradient
        tok_ = {};
        a1_ = {};
        r1_ = {};
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&conv1.w);
        out.push_back(&conv1.b);
        out.push_back(&conv2.w);
        out.push_back(&conv2.b);
    }
};

template <class S>
struct TsBlock {
    int window = 0;
    bool half_pool = false;
    int dim = 0;
    nn::TemporalConv<S> tokenizer;  // valid conv, width = window
    nn::Linear<S> q, k, v, proj;
    nn::DotProductAttention<S> attn;
    nn::CosineMap<S> cosmap;
    // Every consumer downstream of the attention tokens is scale-invariant
    // (the cosine map, and the next block's own entry rescale), while the
    // QK'V product has no softmax bounding it, so token magnitude compounds
    // across blocks and training steps until float overflows. The rescales
    // pin the operating range without changing anything the loss can see.
    nn::RmsScale<S> in_norm, q_norm, k_norm, v_norm;

    // caches
    Mx<S> s_in_, q_, k_, v_, a_, u_;
    Tens<S> tok_in_;

    void init(const std::string& name, int dim_, int window_, int heads, bool half_pool_,
              Rng& rng) {
        dim = dim_;
        window = window_;
        half_pool = half_pool_;
        tokenizer.init(name + ".tokenizer", dim, dim, window, false, rng);
        // The attention product compounds token magnitude cubically and the
        // residual feeds it back into the next block, so plain fan-in init
        // diverges within a few blocks. A reduced gain keeps each block's
        // contribution a small residual; the cosine map downstream is scale
        // invariant, so nothing downstream depends on the absolute magnitude.
        const double gain = 0.25;
        q.init(name + ".q", dim, dim, rng, gain);
        k.init(name + ".k", dim, dim, rng, gain);
        v.init(name + ".v", dim, dim, rng, gain);
        proj.init(name + ".proj", dim, dim, rng, gain);
        attn.configure(heads, dim);
    }

    int out_tokens(int t_in) const {
        const int base = half_pool ? t_in / 2 : t_in;
        return base - window + 1;
    }

    // Returns (s_next, pyramid layer).
    std::pair<Mx<S>, PyramidLayer<S>> forward(const Mx<S>& s_in, bool keep) {
        const int t_in = static_cast<int>(s_in.rows());
        if (window >= (half_pool ? t_in / 2 : t_in)) {
            throw InvalidScaleError("token window " + std::to_string(window) +
                                    " too large for sequence length " + std::to_string(t_in));
        }
        Mx<S> x =
            in_norm.forward(half_pool ? nn::AdaptivePool<S>::forward(s_in, t_in / 2) : s_in);
        const int t_out = out_tokens(t_in);
        Tens<S> xt = Tens<S>::zeros(static_cast<int>(x.rows()), dim, 1, 1);
        for (int t = 0; t < xt.t; ++t) xt.fmat(t) = x.row(t);
        Tens<S> et = tokenizer.forward(xt);
        Mx<S> e(t_out, dim);
        for (int t = 0; t < t_out; ++t) e.row(t) = et.fmat(t);
        Mx<S> qm = q_norm.forward(q.forward(e));
        Mx<S> km = k_norm.forward(k.forward(e));
        Mx<S> vm = v_norm.forward(v.forward(e));
        Mx<S> am = attn.forward(qm, km, vm);
        Mx<S> um = proj.forward(am);
        PyramidLayer<S> layer;
        layer.map = cosmap.forward(um);
        layer.wave = nn::DiagonalWave<S>::forward(layer.map);
        Mx<S> s_next = nn::AdaptivePool<S>::forward(s_in, t_out) + um;
        if (keep) {
            s_in_ = s_in;
            tok_in_ = std::move(xt);
            e_ = std::move(e);
            q_ = std::move(qm);
            k_ = std::move(km);
            v_ = std::move(vm);
            a_ = std::move(am);
            u_ = std::move(um);
        }
        return {std::move(s_next), std::move(layer)};
    }

    // g_map/g_wave: loss gradients on this layer; g_next: gradient on s_next.
    Mx<S> backward(const Mx<S>& g_map, const Vx<S>& g_wave, const Mx<S>& g_next) {
        const int t_in = static_cast<int>(s_in_.rows());
        const int t_out = static_cast<int>(u_.rows());
        Mx<S> gm = g_map + nn::DiagonalWave<S>::backward(t_out, g_wave);
        Mx<S> gu = cosmap.backward(gm) + g_next;
        Mx<S> gs_in = nn::AdaptivePool<S>::backward(t_in, g_next);
        Mx<S> ga = proj.backward(a_, gu);
        Mx<S> gq, gk, gv;
        attn.backward(q_, k_, v_, ga, gq, gk, gv);
        Mx<S> ge = q.backward(e_, q_norm.backward(gq)) + k.backward(e_, k_norm.backward(gk)) +
                   v.backward(e_, v_norm.backward(gv));
        Tens<S> get = Tens<S>::zeros(t_out, dim, 1, 1);
        for (int t = 0; t < t_out; ++t) get.fmat(t) = ge.row(t);
        Tens<S> gxt = tokenizer.backward(tok_in_, get);
        Mx<S> gx(gxt.t, dim);
        for (int t = 0; t < gxt.t; ++t) gx.row(t) = gxt.fmat(t);
        gx = in_norm.backward(gx);
        if (half_pool) {
            gs_in += nn::AdaptivePool<S>::backward(t_in, gx);
        } else {
            gs_in += gx;
        }
        s_in_ = {};
        tok_in_ = {};
        e_ = {};
        q_ = {};
        k_ = {};
        v_ = {};
        a_ = {};
        u_ = {};
        return gs_in;
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&tokenizer.w);
        out.push_back(&tokenizer.b);
        out.push_back(&q.w);
        out.push_back(&q.b);
        out.push_back(&k.w);
        out.push_back(&k.b);
        out.push_back(&v.w);
        out.push_back(&v.b);
        out.push_back(&proj.w);
        out.push_back(&proj.b);
    }

private:
    Mx<S> e_;
};

template <class S>
struct S3m {
    S3mConfig cfg;
    std::vector<TsBlock<S>> blocks;

    void init(const S3mConfig& c, int dim, Rng& rng) {
        c.validate();
        cfg = c;
        blocks.resize(cfg.depth);
        for (int i = 0; i < cfg.depth; ++i) {
            blocks[i].init("s3m.block" + std::to_string(i), dim, cfg.windows[i], cfg.heads,
                           cfg.half_pool_tokenizer && i > 0, rng);
        }
    }

    TemporalSimilarityPyramid<S> forward(const Mx<S>& tokens, bool keep) {
        TemporalSimilarityPyramid<S> pyramid;
        Mx<S> s = tokens;
        for (auto& b : blocks) {
            auto [s_next, layer] = b.forward(s, keep);
            pyramid.push_back(std::move(layer));
            s = std::move(s_next);
        }
        return pyramid;
    }

    // g_maps/g_waves: per-layer loss gradients. Returns token gradient.
    Mx<S> backward(const std::vector<Mx<S>>& g_maps, const std::vector<Vx<S>>& g_waves) {
        Mx<S> g_next;  // gradient flowing into s_{i+1}
        for (int i = cfg.depth - 1; i >= 0; --i) {
            const int t_out = static_cast<int>(blocks[i].u_.rows());
            if (g_next.size() == 0) g_next = Mx<S>::Zero(t_out, blocks[i].dim);
            g_next = blocks[i].backward(g_maps[i], g_waves[i], g_next);
        }
        return g_next;
    }

    void collect(std::vector<Param<S>*>& out) {
        for (auto& b : blocks) b.collect(out);
    }
};

template <class S>
struct NetworkOutputs {
    Vx<S> rppg;
    Mx<S> tokens;  // T x C backbone output
    TemporalSimilarityPyramid<S> pyramid;
};

struct CostReport {
    long long params_inference = 0;
    long long params_total = 0;
    double flops_inference = 0;  // multiply-accumulates x 2, S3M excluded
};

template <class S>
struct Network {
    ModelConfig cfg;
    Backbone<S> backbone;
    Predictor<S> predictor;
    S3m<S> s3m;

    void init(const ModelConfig& c) {
        cfg = c;
        Rng rng(c.init_seed);
        backbone.init(c.backbone, rng);
        predictor.init(c.predictor, c.backbone.feature_dim(), rng);
        s3m.init(c.s3m, c.backbone.feature_dim(), rng);
    }

    // Training-path forward through backbone, predictor and S3M. With
    // keep=true all caches needed by backward() are retained.
    NetworkOutputs<S> forward(Tens<S> diff_clip, bool keep) {
        auto [map, tokens] = backbone.forward(std::move(diff_clip), keep);
        NetworkOutputs<S> out;
        out.rppg = predictor.forward(map, keep);
        map = {};
        out.pyramid = s3m.forward(tokens, keep);
        out.tokens = std::move(tokens);
        return out;
    }

    // Inference path: backbone + predictor only; S3M is never touched, so the
    // output is identical whether its parameters are present or randomized.
    Vx<S> inference(Tens<S> diff_clip) {
        auto [map, tokens] = backbone.forward(std::move(diff_clip), false);
        return predictor.forward(map, false);
    }

    void backward(const Vx<S>& g_rppg, const std::vector<Mx<S>>& g_maps,
                  const std::vector<Vx<S>>& g_waves, const Mx<S>& g_tokens_extra = {}) {
        predictor.backward(g_rppg);
        Mx<S> g_tokens = s3m.backward(g_maps, g_waves);
        if (g_tokens_extra.size() > 0) g_tokens += g_tokens_extra;
        backbone.backward(g_tokens);
    }

    std::vector<Param<S>*> params() {
        std::vector<Param<S>*> out;
        backbone.collect(out);
        predictor.collect(out);
        s3m.collect(out);
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->grad.setZero();
    }

    CostReport count_cost(int t_frames) const;
};

// Exact parameter counts; FLOPs as 2 x multiply-accumulates over the conv and
// linear maps on the inference path (frame difference included upstream by the
// benchmark, not here).
template <class S>
CostReport Network<S>::count_cost(int t_frames) const {
    CostReport r;
    long long backbone_pred = 0;
    for (const auto& b : backbone.blocks) {
        backbone_pred += b.sconv.w.value.size() + b.sconv.b.value.size();
        backbone_pred += b.norm1.gamma.value.size() + b.norm1.beta.value.size();
        backbone_pred += b.tconv.w.value.size() + b.tconv.b.value.size();
        backbone_pred += b.norm2.gamma.value.size() + b.norm2.beta.value.size();
    }
    backbone_pred += predictor.conv1.w.value.size() + predictor.conv1.b.value.size();
    backbone_pred += predictor.conv2.w.value.size() + predictor.conv2.b.value.size();
    r.params_inference = backbone_pred;
    r.params_total = backbone_pred;
    for (const auto& b : s3m.blocks) {
        r.params_total += b.tokenizer.w.value.size() + b.tokenizer.b.value.size();
        r.params_total += 4 * (b.q.w.value.size() + b.q.b.value.size());
    }

    double mac = 0;
    int spatial = cfg.backbone.input_size;
    int cin = cfg.backbone.in_channels;
    for (int c_out : cfg.backbone.block_channels) {
        const int s_out = (spatial + 1) / 2;
        mac += static_cast<double>(t_frames) * s_out * s_out * c_out * cin * 9;        // sconv
        mac += static_cast<double>(t_frames) * s_out * s_out * c_out * c_out *
               cfg.backbone.temporal_kernel;                                           // tconv
        spatial = s_out;
        cin = c_out;
    }
    const int c_feat = cfg.backbone.feature_dim();
    mac += static_cast<double>(t_frames) * c_feat * cfg.predictor.hidden * cfg.predictor.kernel;
    mac += static_cast<double>(t_frames) * cfg.predictor.hidden * 1 * cfg.predictor.kernel;
    r.flops_inference = 2.0 * mac;
    return r;
}

}  // namespace sspd::model
