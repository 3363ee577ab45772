#pragma once

// Differentiable training objectives: pyramid map/wave matching, wave-level
// prediction matching (Pearson + spectral), plus the standard-deviation and
// band-SNR regularizers. All gradients are analytic.

#include <cmath>
#include <optional>
#include <vector>

#include "sspd/model.hpp"
#include "sspd/nn.hpp"
#include "sspd/signal.hpp"

namespace sspd::loss {

using model::PyramidLayer;
using model::TemporalSimilarityPyramid;
using nn::Mx;
using nn::Vx;

struct LossWeights {
    double lambda1 = 0.8;  // SD regularizer
    double lambda2 = 0.6;  // SNR regularizer
    double decay_epsilon = 0.05;
    double band_lo_hz = signal::kHrBandLoHz;
    double band_hi_hz = signal::kHrBandHiHz;
    double snr_guard = signal::kSnrGuard;
};

struct LossBreakdown {
    double tspd = 0;
    double rpd = 0;
    double sd = 0;
    double snr = 0;
    double total = 0;
};

// --- elementary pieces -----------------------------------------------------

// MSE over all entries with gradient on `pred` only (target is detached).
template <class S>
S mse(const Mx<S>& pred, const Mx<S>& target, Mx<S>& g_pred) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw ShapeError("mse operands disagree in shape");
    }
    const S n = static_cast<S>(pred.size());
    Mx<S> diff = pred - target;
    g_pred = (S(2) / n) * diff;
    return diff.array().square().sum() / n;
}

template <class S>
S mse_vec(const Vx<S>& pred, const Vx<S>& target, Vx<S>& g_pred) {
    if (pred.size() != target.size()) throw ShapeError("mse operands disagree in length");
    const S n = static_cast<S>(pred.size());
    Vx<S> diff = pred - target;
    g_pred = (S(2) / n) * diff;
    return diff.array().square().sum() / n;
}

// Negative Pearson correlation, gradient on `x` only.
template <class S>
S negative_pearson(const Vx<S>& x, const Vx<S>& y, Vx<S>& gx) {
    if (x.size() != y.size() || x.size() < 2) throw ShapeError("pearson needs equal length >= 2");
    const S n = static_cast<S>(x.size());
    Vx<S> xc = x.array() - x.mean();
    Vx<S> yc = y.array() - y.mean();
    const S sxy = xc.dot(yc);
    const S sxx = xc.dot(xc);
    const S syy = yc.dot(yc);
    if (sxx <= S(0) || syy <= S(0)) {
        throw DegenerateCorrelationError("pearson undefined for constant signal");
    }
    const S denom = std::sqrt(sxx * syy);
    const S r = sxy / denom;
    // d r / d x = (yc - r * sqrt(syy/sxx) * xc) / denom, then recenter.
    Vx<S> gr = (yc - (r * std::sqrt(syy / sxx)) * xc) / denom;
    gx = -(gr.array() - gr.mean());
    return S(1) - r;
}

// Unit-sum power spectrum over DFT bins 1..T/2 with chain-rule backward.
template <class S>
struct DiffPsd {
    Vx<S> freqs;     // Hz
    Vx<S> density;   // sums to 1
    Vx<S> re_, im_;  // cached DFT parts
    S total_ = 0;
    int t_ = 0;
    double fs_ = 0;

    void forward(const Vx<S>& x, double fs) {
        t_ = static_cast<int>(x.size());
        fs_ = fs;
        if (t_ < 4) throw ShapeError("psd needs at least 4 samples");
        const int kmax = t_ / 2;
        Vx<S> xc = x.array() - x.mean();
        freqs.resize(kmax);
        density.resize(kmax);
        re_.resize(kmax);
        im_.resize(kmax);
        xc_ = xc;
        total_ = 0;
        for (int k = 1; k <= kmax; ++k) {
            S re = 0, im = 0;
            const double w = 2.0 * M_PI * k / t_;
            for (int n = 0; n < t_; ++n) {
                re += xc[n] * static_cast<S>(std::cos(w * n));
                im -= xc[n] * static_cast<S>(std::sin(w * n));
            }
            re_[k - 1] = re;
            im_[k - 1] = im;
            freqs[k - 1] = static_cast<S>(fs * k / t_);
            density[k - 1] = re * re + im * im;
            total_ += density[k - 1];
        }
        if (total_ <= S(1e-24)) throw ZeroPowerError("signal has no spectral power");
        density /= total_;
    }

    // g = dL/d density -> returns dL/dx.
    Vx<S> backward(const Vx<S>& g) const {
        const int kmax = t_ / 2;
        const S gq = g.dot(density);  // <g, normalized density>
        Vx<S> gx = Vx<S>::Zero(t_);
        for (int k = 1; k <= kmax; ++k) {
            const S coef = (S(2) / total_) * (g[k - 1] - gq);
            const double w = 2.0 * M_PI * k / t_;
            for (int n = 0; n < t_; ++n) {
                gx[n] += coef * (re_[k - 1] * static_cast<S>(std::cos(w * n)) -
                                 im_[k - 1] * static_cast<S>(std::sin(w * n)));
            }
        }
        return (gx.array() - gx.mean()).matrix();
    }

private:
    Vx<S> xc_;
};

// Band-to-residual power ratio on a DiffPsd, with gradient on the density.
template <class S>
S band_snr_diff(const DiffPsd<S>& psd, double lo, double hi, double guard, Vx<S>& g_density) {
    S in_band = 0, out_band = 0;
    bool any = false;
    const int k = static_cast<int>(psd.density.size());
    std::vector<bool> inb(k, false);
    for (int i = 0; i < k; ++i) {
        const double f = static_cast<double>(psd.freqs[i]);
        inb[i] = (f >= lo && f <= hi);
        any = any || inb[i];
        (inb[i] ? in_band : out_band) += psd.density[i];
    }
    if (!any) throw EmptyBandError("no spectral bins inside the pulse band");
    const S denom = out_band + static_cast<S>(guard);
    const S snr = in_band / denom;
    g_density.resize(k);
    for (int i = 0; i < k; ++i) {
        g_density[i] = inb[i] ? S(1) / denom : -in_band / (denom * denom);
    }
    return snr;
}

// --- composite objectives --------------------------------------------------

// Gradient accumulator for the loss side of one clip. Map/wave entries align
// with the online network's pyramid layers.
template <class S>
struct ClipGrads {
    Vx<S> g_rppg;
    std::vector<Mx<S>> g_maps;
    std::vector<Vx<S>> g_waves;

    static ClipGrads zeros_like(const model::NetworkOutputs<S>& out) {
        ClipGrads g;
        g.g_rppg = Vx<S>::Zero(out.rppg.size());
        for (const auto& layer : out.pyramid) {
            g.g_maps.push_back(Mx<S>::Zero(layer.map.rows(), layer.map.cols()));
            g.g_waves.push_back(Vx<S>::Zero(layer.wave.size()));
        }
        return g;
    }
};

// Temporal-similarity pyramid distillation: layerwise map + wave MSE between
// the online pyramid (gradient side) and the detached target pyramid.
template <class S>
S tspd_loss(const TemporalSimilarityPyramid<S>& online, const TemporalSimilarityPyramid<S>& target,
            ClipGrads<S>& grads) {
    if (online.size() != target.size()) throw ShapeError("pyramid depths disagree");
    S total = 0;
    for (size_t j = 0; j < online.size(); ++j) {
        Mx<S> gm;
        Vx<S> gw;
        total += mse(online[j].map, target[j].map, gm);
        total += mse_vec(online[j].wave, target[j].wave, gw);
        grads.g_maps[j] += gm;
        grads.g_waves[j] += gw;
    }
    return total;
}

// rPPG-level distillation: negative Pearson plus spectral MSE between the
// online prediction (gradient side) and the detached target prediction.
template <class S>
S rpd_loss(const Vx<S>& online, const Vx<S>& target, double fs, ClipGrads<S>& grads) {
    Vx<S> gp;
    S total = negative_pearson(online, target, gp);
    DiffPsd<S> po, pt;
    po.forward(online, fs);
    pt.forward(target, fs);
    Vx<S> gd;
    total += mse_vec(po.density, pt.density, gd);
    grads.g_rppg += gp + po.backward(gd);
    return total;
}

// Standard-deviation penalty over each upper-triangle diagonal of every
// pyramid map, with a linearly decaying per-lag scale.
template <class S>
S sd_regularizer(const TemporalSimilarityPyramid<S>& online, double epsilon, ClipGrads<S>& grads) {
    S total = 0;
    const S inv_layers = S(1) / static_cast<S>(online.size());
    for (size_t j = 0; j < online.size(); ++j) {
        const Mx<S>& map = online[j].map;
        const int tj = static_cast<int>(map.rows());
        const S inv_t = S(1) / static_cast<S>(tj);
        for (int k = 1; k <= tj; ++k) {  // k = 1 is the main diagonal
            const int len = tj + 1 - k;
            const S scale = static_cast<S>(epsilon) * static_cast<S>(len);
            Vx<S> seg(len);
            for (int i = 0; i < len; ++i) seg[i] = scale * map(i, i + k - 1);
            const S m = seg.mean();
            const S var = (seg.array() - m).square().sum() / static_cast<S>(len);
            const S sd = std::sqrt(var + S(1e-12));
            total += inv_layers * inv_t * sd;
            // d sd / d map(i, i+k-1) = scale * (seg_i - m) / (len * sd)
            const S coef = inv_layers * inv_t * scale / (static_cast<S>(len) * sd);
            for (int i = 0; i < len; ++i) {
                grads.g_maps[j](i, i + k - 1) += coef * (seg[i] - m);
            }
        }
    }
    return total;
}

// Inverse band-SNR penalty over every pyramid wave and the predicted rPPG.
template <class S>
S snr_regularizer(const TemporalSimilarityPyramid<S>& online, const Vx<S>& rppg, double fs,
                  const LossWeights& w, ClipGrads<S>& grads) {
    const S inv_layers = S(1) / static_cast<S>(online.size());
    S total = 0;
    for (size_t j = 0; j < online.size(); ++j) {
        DiffPsd<S> psd;
        psd.forward(online[j].wave, fs);
        Vx<S> gd;
        const S snr = band_snr_diff(psd, w.band_lo_hz, w.band_hi_hz, w.snr_guard, gd);
        total += inv_layers / snr;
        grads.g_waves[j] += psd.backward((-inv_layers / (snr * snr)) * gd);
    }
    DiffPsd<S> psd;
    psd.forward(rppg, fs);
    Vx<S> gd;
    const S snr = band_snr_diff(psd, w.band_lo_hz, w.band_hi_hz, w.snr_guard, gd);
    total += inv_layers / snr;
    grads.g_rppg += psd.backward((-inv_layers / (snr * snr)) * gd);
    return total;
}

// Full objective for one clip; weight contributes 1/N inside a batch.
template <class S>
LossBreakdown clip_loss(const model::NetworkOutputs<S>& online,
                        const model::NetworkOutputs<S>& target, double fs, const LossWeights& w,
                        ClipGrads<S>& grads) {
    LossBreakdown b;
    b.tspd = static_cast<double>(tspd_loss(online.pyramid, target.pyramid, grads));
    {
        ClipGrads<S> rg = ClipGrads<S>::zeros_like(online);
        b.rpd = static_cast<double>(rpd_loss(online.rppg, target.rppg, fs, rg));
        grads.g_rppg += rg.g_rppg;
    }
    {
        ClipGrads<S> sg = ClipGrads<S>::zeros_like(online);
        b.sd = static_cast<double>(sd_regularizer(online.pyramid, w.decay_epsilon, sg));
        for (size_t j = 0; j < sg.g_maps.size(); ++j) {
            grads.g_maps[j] += static_cast<S>(w.lambda1) * sg.g_maps[j];
        }
    }
    {
        ClipGrads<S> ng = ClipGrads<S>::zeros_like(online);
        b.snr = static_cast<double>(snr_regularizer(online.pyramid, online.rppg, fs, w, ng));
        for (size_t j = 0; j < ng.g_waves.size(); ++j) {
            grads.g_waves[j] += static_cast<S>(w.lambda2) * ng.g_waves[j];
        }
        grads.g_rppg += static_cast<S>(w.lambda2) * ng.g_rppg;
    }
    b.total = b.tspd + b.rpd + w.lambda1 * b.sd + w.lambda2 * b.snr;
    if (!std::isfinite(b.total)) throw TrainingDivergenceError("loss is not finite");
    return b;
}

}  // namespace sspd::loss
