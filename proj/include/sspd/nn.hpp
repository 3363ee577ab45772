#pragma once

// Minimal differentiable layer zoo on Eigen, templated on scalar so the same
// code runs float for training and double for finite-difference checks.
// Layers cache what their backward pass needs; one forward per backward.

#include <Eigen/Core>
#include <Eigen/StdVector>
#include <cmath>
#include <string>
#include <vector>

#include "sspd/errors.hpp"
#include "sspd/rng.hpp"

namespace sspd::nn {

template <class S>
using Mx = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vx = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Fixed-alignment storage: Eigen's vectorized reductions peel loops by
// address, so unaligned heap buffers would make results depend on where the
// allocator happened to place them run-to-run.
template <class S>
using AlignedVector = std::vector<S, Eigen::aligned_allocator<S>>;

// 4-D tensor, layout (T, C, H, W) contiguous; tokens use (T, C, 1, 1).
template <class S>
struct Tens {
    int t = 0, c = 0, h = 0, w = 0;
    AlignedVector<S> d;

    static Tens zeros(int t, int c, int h, int w) {
        Tens x;
        x.t = t;
        x.c = c;
        x.h = h;
        x.w = w;
        x.d.assign(static_cast<size_t>(t) * c * h * w, S(0));
        return x;
    }
    size_t size() const { return d.size(); }
    int spatial() const { return h * w; }
    size_t frame_stride() const { return static_cast<size_t>(c) * h * w; }
    S* frame(int i) { return d.data() + i * frame_stride(); }
    const S* frame(int i) const { return d.data() + i * frame_stride(); }

    // Per-frame view: positions x channels (column c = contiguous plane).
    Eigen::Map<Mx<S>> fmat(int i) { return {frame(i), spatial(), c}; }
    Eigen::Map<const Mx<S>> fmat(int i) const { return {frame(i), spatial(), c}; }
};

// Tokens as an owned T x C matrix (row = token) are easier to reason about for
// the attention stack, so the S3M path uses Mx<S> directly instead of Tens.

template <class S>
struct Param {
    std::string name;
    Vx<S> value;
    Vx<S> grad;

    void init_zero(const std::string& n, int size) {
        name = n;
        value = Vx<S>::Zero(size);
        grad = Vx<S>::Zero(size);
    }
};

template <class S>
struct SpatialConv {
    // 3x3, pad 1, configurable stride. Weight layout: (cin*9) x cout.
    int cin = 0, cout = 0, stride = 1;
    Param<S> w, b;

    void init(const std::string& name, int cin_, int cout_, int stride_, Rng& rng) {
        cin = cin_;
        cout = cout_;
        stride = stride_;
        w.init_zero(name + ".w", cin * 9 * cout);
        b.init_zero(name + ".b", cout);
        const double sd = std::sqrt(2.0 / (cin * 9));
        for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value[i] = static_cast<S>(rng.gaussian(0, sd));
    }

    int out_dim(int in) const { return (in + 2 * 1 - 3) / stride + 1; }

    void im2col(const Tens<S>& in, int frame, Mx<S>& col) const {
        const int ho = out_dim(in.h), wo = out_dim(in.w);
        const int p = ho * wo;
        col.resize(p, cin * 9);
        const S* f = in.frame(frame);
        for (int ci = 0; ci < cin; ++ci) {
            const S* plane = f + static_cast<size_t>(ci) * in.h * in.w;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    S* dst = col.col(ci * 9 + ky * 3 + kx).data();
                    for (int y = 0; y < ho; ++y) {
                        const int sy = y * stride + ky - 1;
                        for (int x = 0; x < wo; ++x) {
                            const int sx = x * stride + kx - 1;
                            dst[y * wo + x] =
                                (sy >= 0 && sy < in.h && sx >= 0 && sx < in.w)
                                    ? plane[sy * in.w + sx]
                                    : S(0);
                        }
                    }
                }
            }
        }
    }

    Tens<S> forward(const Tens<S>& in) {
        if (in.c != cin) throw ShapeError("SpatialConv channel mismatch");
        Tens<S> out = Tens<S>::zeros(in.t, cout, out_dim(in.h), out_dim(in.w));
        Eigen::Map<const Mx<S>> wm(w.value.data(), cin * 9, cout);
        Mx<S> col;
        for (int t = 0; t < in.t; ++t) {
            im2col(in, t, col);
            auto om = out.fmat(t);
            om.noalias() = col * wm;
            om.rowwise() += Eigen::Map<const Vx<S>>(b.value.data(), cout).transpose();
        }
        return out;
    }

    // Accumulates parameter gradients; returns gradient w.r.t. the input.
    Tens<S> backward(const Tens<S>& in, const Tens<S>& gout) {
        Tens<S> gin = Tens<S>::zeros(in.t, in.c, in.h, in.w);
        Eigen::Map<const Mx<S>> wm(w.value.data(), cin * 9, cout);
        Eigen::Map<Mx<S>> gw(w.grad.data(), cin * 9, cout);
        Eigen::Map<Vx<S>> gb(b.grad.data(), cout);
        const int ho = out_dim(in.h), wo = out_dim(in.w);
        Mx<S> col, gcol;
        for (int t = 0; t < in.t; ++t) {
            im2col(in, t, col);
            auto gm = gout.fmat(t);
            gw.noalias() += col.transpose() * gm;
            gb.noalias() += gm.colwise().sum().transpose();
            gcol.noalias() = gm * wm.transpose();
            // col2im
            S* f = gin.frame(t);
            for (int ci = 0; ci < cin; ++ci) {
                S* plane = f + static_cast<size_t>(ci) * in.h * in.w;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const S* src = gcol.col(ci * 9 + ky * 3 + kx).data();
                        for (int y = 0; y < ho; ++y) {
                            const int sy = y * stride + ky - 1;
                            if (sy < 0 || sy >= in.h) continue;
                            for (int x = 0; x < wo; ++x) {
                                const int sx = x * stride + kx - 1;
                                if (sx >= 0 && sx < in.w) plane[sy * in.w + sx] += src[y * wo + x];
                            }
                        }
                    }
                }
            }
        }
        return gin;
    }
};

// 1-D convolution over the frame axis mixing channels, applied independently
// at every spatial position. Weight layout: per tap dt, a cin x cout block.
template <class S>
struct TemporalConv {
    int cin = 0, cout = 0, k = 0;
    bool same_pad = true;  // false: valid (T_out = T_in - k + 1)
    Param<S> w, b;

    void init(const std::string& name, int cin_, int cout_, int k_, bool same, Rng& rng) {
        cin = cin_;
        cout = cout_;
        k = k_;
        same_pad = same;
        w.init_zero(name + ".w", k * cin * cout);
        b.init_zero(name + ".b", cout);
        const double sd = std::sqrt(2.0 / (cin * k));
        for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value[i] = static_cast<S>(rng.gaussian(0, sd));
    }

    int out_frames(int t_in) const { return same_pad ? t_in : t_in - k + 1; }

    Tens<S> forward(const Tens<S>& in) {
        if (in.c != cin) throw ShapeError("TemporalConv channel mismatch");
        const int t_out = out_frames(in.t);
        if (t_out < 1) throw InvalidScaleError("temporal window exceeds sequence length");
        Tens<S> out = Tens<S>::zeros(t_out, cout, in.h, in.w);
        const int pad = same_pad ? (k - 1) / 2 : 0;
        for (int t = 0; t < t_out; ++t) {
            auto om = out.fmat(t);
            om.rowwise() += Eigen::Map<const Vx<S>>(b.value.data(), cout).transpose();
            for (int dt = 0; dt < k; ++dt) {
                const int src = t + dt - pad;
                if (src < 0 || src >= in.t) continue;
                Eigen::Map<const Mx<S>> wd(w.value.data() + static_cast<size_t>(dt) * cin * cout,
                                           cin, cout);
                om.noalias() += in.fmat(src) * wd;
            }
        }
        return out;
    }

    Tens<S> backward(const Tens<S>& in, const Tens<S>& gout) {
        Tens<S> gin = Tens<S>::zeros(in.t, in.c, in.h, in.w);
        Eigen::Map<Vx<S>> gb(b.grad.data(), cout);
        const int pad = same_pad ? (k - 1) / 2 : 0;
        for (int t = 0; t < gout.t; ++t) {
            auto gm = gout.fmat(t);
            gb.noalias() += gm.colwise().sum().transpose();
            for (int dt = 0; dt < k; ++dt) {
                const int src = t + dt - pad;
                if (src < 0 || src >= in.t) continue;
                Eigen::Map<const Mx<S>> wd(w.value.data() + static_cast<size_t>(dt) * cin * cout,
                                           cin, cout);
                Eigen::Map<Mx<S>> gw(w.grad.data() + static_cast<size_t>(dt) * cin * cout, cin,
                                     cout);
                gw.noalias() += in.fmat(src).transpose() * gm;
                gin.fmat(src).noalias() += gm * wd.transpose();
            }
        }
        return gin;
    }
};

// Per-channel normalization using the statistics of the current clip
// (population variance over T*H*W). Deterministic in both train and eval.
template <class S>
struct ChannelNorm {
    int c = 0;
    S eps = S(1e-5);
    Param<S> gamma, beta;
    Vx<S> mean_, invstd_;  // cached by forward

    void init(const std::string& name, int c_) {
        c = c_;
        gamma.init_zero(name + ".gamma", c);
        beta.init_zero(name + ".beta", c);
        gamma.value.setOnes();
    }

    Tens<S> forward(const Tens<S>& in) {
        if (in.c != c) throw ShapeError("ChannelNorm channel mismatch");
        const Eigen::Index n = static_cast<Eigen::Index>(in.t) * in.spatial();
        mean_ = Vx<S>::Zero(c);
        Vx<S> sq = Vx<S>::Zero(c);
        for (int t = 0; t < in.t; ++t) {
            auto m = in.fmat(t);
            mean_ += m.colwise().sum().transpose();
            sq += m.array().square().colwise().sum().matrix().transpose();
        }
        mean_ /= S(n);
        invstd_ = ((sq.array() / S(n) - mean_.array().square()).max(S(0)) + eps)
                      .rsqrt()
                      .matrix();
        Tens<S> out = Tens<S>::zeros(in.t, in.c, in.h, in.w);
        const Vx<S> scale = (invstd_.array() * gamma.value.array()).matrix();
        for (int t = 0; t < in.t; ++t) {
            out.fmat(t) = ((in.fmat(t).rowwise() - mean_.transpose()) * scale.asDiagonal())
                              .rowwise() +
                          beta.value.transpose();
        }
        return out;
    }

    Tens<S> backward(const Tens<S>& in, const Tens<S>& gout) {
        const Eigen::Index n = static_cast<Eigen::Index>(in.t) * in.spatial();
        Vx<S> sum_g = Vx<S>::Zero(c);
        Vx<S> sum_gx = Vx<S>::Zero(c);  // sum of g * xhat
        Mx<S> xhat;
        for (int t = 0; t < in.t; ++t) {
            auto g = gout.fmat(t);
            xhat = (in.fmat(t).rowwise() - mean_.transpose()) * invstd_.asDiagonal();
            sum_g += g.colwise().sum().transpose();
            sum_gx += (g.array() * xhat.array()).colwise().sum().matrix().transpose();
        }
        gamma.grad += sum_gx;
        beta.grad += sum_g;
        Tens<S> gin = Tens<S>::zeros(in.t, in.c, in.h, in.w);
        const Vx<S> scale = (gamma.value.array() * invstd_.array() / S(n)).matrix();
        Mx<S> tmp;
        for (int t = 0; t < in.t; ++t) {
            auto g = gout.fmat(t);
            xhat = (in.fmat(t).rowwise() - mean_.transpose()) * invstd_.asDiagonal();
            tmp = g * S(n);
            tmp.noalias() -= xhat * sum_gx.asDiagonal();
            tmp.rowwise() -= sum_g.transpose();
            gin.fmat(t) = tmp * scale.asDiagonal();
        }
        return gin;
    }
};

template <class S>
struct Relu {
    Tens<S> forward(const Tens<S>& in) {
        Tens<S> out = in;
        for (auto& v : out.d) v = v > S(0) ? v : S(0);
        return out;
    }
    Tens<S> backward(const Tens<S>& out, const Tens<S>& gout) {
        Tens<S> gin = gout;
        for (size_t i = 0; i < gin.d.size(); ++i) {
            if (out.d[i] <= S(0)) gin.d[i] = S(0);
        }
        return gin;
    }
};

// Spatial global average pooling: (T,C,H,W) -> T x C token matrix.
template <class S>
struct SpatialGap {
    static Mx<S> forward(const Tens<S>& in) {
        Mx<S> out(in.t, in.c);
        for (int t = 0; t < in.t; ++t) out.row(t) = in.fmat(t).colwise().mean();
        return out;
    }
    static Tens<S> backward(const Tens<S>& in_shape, const Mx<S>& gout) {
        Tens<S> gin = Tens<S>::zeros(in_shape.t, in_shape.c, in_shape.h, in_shape.w);
        const S inv = S(1) / S(in_shape.spatial());
        for (int t = 0; t < gin.t; ++t) {
            gin.fmat(t) = (gout.row(t) * inv).replicate(in_shape.spatial(), 1);
        }
        return gin;
    }
};

// Tokenwise linear map on a T x C matrix.
template <class S>
struct Linear {
    int cin = 0, cout = 0;
    Param<S> w, b;  // w: cin x cout

    void init(const std::string& name, int cin_, int cout_, Rng& rng, double gain = 1.0) {
        cin = cin_;
        cout = cout_;
        w.init_zero(name + ".w", cin * cout);
        b.init_zero(name + ".b", cout);
        const double sd = gain * std::sqrt(1.0 / cin);
        for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value[i] = static_cast<S>(rng.gaussian(0, sd));
    }

    Mx<S> forward(const Mx<S>& x) {
        Eigen::Map<const Mx<S>> wm(w.value.data(), cin, cout);
        return (x * wm).rowwise() + b.value.transpose();
    }
    Mx<S> backward(const Mx<S>& x, const Mx<S>& gout) {
        Eigen::Map<const Mx<S>> wm(w.value.data(), cin, cout);
        Eigen::Map<Mx<S>> gw(w.grad.data(), cin, cout);
        gw.noalias() += x.transpose() * gout;
        b.grad += gout.colwise().sum().transpose();
        return gout * wm.transpose();
    }
};

// Softmax-free multi-head dot-product attention: per head,
// A_h = (Q_h K_h^T / C) V_h with C the full embedding dimension.
template <class S>
struct DotProductAttention {
    int heads = 1;
    int dim = 0;  // full C
    std::vector<Mx<S>> scores_;  // cached per head

    void configure(int heads_, int dim_) {
        heads = heads_;
        dim = dim_;
        if (dim % heads != 0) throw ConfigError("attention dim must divide heads");
    }

    Mx<S> forward(const Mx<S>& q, const Mx<S>& k, const Mx<S>& v) {
        const int hd = dim / heads;
        const auto t = q.rows();
        Mx<S> out(t, dim);
        scores_.assign(heads, {});
        for (int h = 0; h < heads; ++h) {
            auto qh = q.middleCols(h * hd, hd);
            auto kh = k.middleCols(h * hd, hd);
            auto vh = v.middleCols(h * hd, hd);
            scores_[h].noalias() = qh * kh.transpose() / S(dim);
            out.middleCols(h * hd, hd).noalias() = scores_[h] * vh;
        }
        return out;
    }

    void backward(const Mx<S>& q, const Mx<S>& k, const Mx<S>& v, const Mx<S>& gout,
                  Mx<S>& gq, Mx<S>& gk, Mx<S>& gv) {
        const int hd = dim / heads;
        gq.setZero(q.rows(), dim);
        gk.setZero(k.rows(), dim);
        gv.setZero(v.rows(), dim);
        for (int h = 0; h < heads; ++h) {
            auto qh = q.middleCols(h * hd, hd);
            auto kh = k.middleCols(h * hd, hd);
            auto vh = v.middleCols(h * hd, hd);
            auto gh = gout.middleCols(h * hd, hd);
            gv.middleCols(h * hd, hd).noalias() = scores_[h].transpose() * gh;
            Mx<S> gs = gh * vh.transpose() / S(dim);
            gq.middleCols(h * hd, hd).noalias() = gs * kh;
            gk.middleCols(h * hd, hd).noalias() = gs.transpose() * qh;
        }
    }
};

// Differentiable cosine self-similarity map from a T x C token matrix.
// Matrix-wide RMS rescale with exact gradient. Used where every downstream
// consumer is scale-invariant, so the rescale only keeps magnitudes inside
// the representable float range without changing what is learned.
template <class S>
struct RmsScale {
    Mx<S> y_;
    S r_ = S(1);

    Mx<S> forward(const Mx<S>& x) {
        r_ = std::sqrt(x.squaredNorm() / static_cast<S>(x.size()) + S(1e-8));
        y_ = x / r_;
        return y_;
    }

    // g = dL/dy -> dL/dx = (g - y * mean(g .* y)) / r.
    Mx<S> backward(const Mx<S>& g) const {
        const S d = (g.array() * y_.array()).sum() / static_cast<S>(g.size());
        return (g - d * y_) / r_;
    }
};

// Output is exactly symmetric with unit diagonal.
template <class S>
struct CosineMap {
    Mx<S> unit_;   // normalized tokens
    Vx<S> norms_;  // norms of the rescaled tokens
    Mx<S> map_;
    S scale_ = S(1);

    Mx<S> forward(const Mx<S>& u) {
        const auto t = u.rows();
        // Cosine similarity is exactly invariant to a global rescale; dividing
        // by the max magnitude first keeps the squared norms inside the
        // representable range for large-magnitude tokens. The gradient is
        // unaffected apart from the matching 1/scale factor in backward().
        scale_ = u.cwiseAbs().maxCoeff();
        if (!(scale_ > S(0))) throw DegenerateTokenError("zero-norm token in cosine map");
        Mx<S> us = u / scale_;
        norms_ = us.rowwise().norm();
        for (Eigen::Index i = 0; i < t; ++i) {
            if (norms_[i] <= S(0)) throw DegenerateTokenError("zero-norm token in cosine map");
        }
        unit_ = norms_.cwiseInverse().asDiagonal() * us;
        map_.noalias() = unit_ * unit_.transpose();
        // One triangle is authoritative; mirror it and pin the diagonal.
        for (Eigen::Index i = 0; i < t; ++i) {
            map_(i, i) = S(1);
            for (Eigen::Index j = i + 1; j < t; ++j) map_(j, i) = map_(i, j);
        }
        return map_;
    }

    Mx<S> backward(const Mx<S>& gmap) {
        Mx<S> h = gmap + gmap.transpose();
        Mx<S> gu = h * unit_;
        const Vx<S> rowdot = (h.array() * map_.array()).rowwise().sum();
        gu -= rowdot.asDiagonal() * unit_;
        return (norms_ * scale_).cwiseInverse().asDiagonal() * gu;
    }
};

// Per-lag means of the upper-triangle diagonals of a T x T map.
template <class S>
struct DiagonalWave {
    static Vx<S> forward(const Mx<S>& map) {
        const auto t = map.rows();
        Vx<S> wave(t);
        for (Eigen::Index lag = 0; lag < t; ++lag) {
            S sum = S(0);
            for (Eigen::Index j = 0; j + lag < t; ++j) sum += map(j, j + lag);
            wave[lag] = sum / S(t - lag);
        }
        return wave;
    }
    // Gradient lands on the upper triangle only (the wave's domain).
    static Mx<S> backward(Eigen::Index t, const Vx<S>& gwave) {
        Mx<S> gmap = Mx<S>::Zero(t, t);
        for (Eigen::Index lag = 0; lag < t; ++lag) {
            const S g = gwave[lag] / S(t - lag);
            for (Eigen::Index j = 0; j + lag < t; ++j) gmap(j, j + lag) += g;
        }
        return gmap;
    }
};

// Adaptive average pooling of a T x C token matrix to t_out rows.
template <class S>
struct AdaptivePool {
    static void bounds(int t_in, int t_out, int i, int& lo, int& hi) {
        lo = static_cast<int>(static_cast<long long>(i) * t_in / t_out);
        hi = static_cast<int>((static_cast<long long>(i + 1) * t_in + t_out - 1) / t_out);
    }
    static Mx<S> forward(const Mx<S>& x, int t_out) {
        const int t_in = static_cast<int>(x.rows());
        Mx<S> out(t_out, x.cols());
        for (int i = 0; i < t_out; ++i) {
            int lo, hi;
            bounds(t_in, t_out, i, lo, hi);
            out.row(i) = x.middleRows(lo, hi - lo).colwise().mean();
        }
        return out;
    }
    static Mx<S> backward(int t_in, const Mx<S>& gout) {
        const int t_out = static_cast<int>(gout.rows());
        Mx<S> gin = Mx<S>::Zero(t_in, gout.cols());
        for (int i = 0; i < t_out; ++i) {
            int lo, hi;
            bounds(t_in, t_out, i, lo, hi);
            gin.middleRows(lo, hi - lo).rowwise() += (gout.row(i) / S(hi - lo)).eval();
        }
        return gin;
    }
};

}  // namespace sspd::nn
