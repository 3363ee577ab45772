#include "sspd/augment.hpp"

#include <algorithm>
#include <cmath>

namespace sspd::augment {

void AugmentConfig::validate() const {
    if (mask_ratio_p < 0 || mask_ratio_p >= 1) {
        throw ConfigError("mask_ratio_p must be in [0, 1)");
    }
    if (!(crop_scale_min > 0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1)) {
        throw ConfigError("crop_scale must satisfy 0 < min <= max <= 1");
    }
    if (flip_prob < 0 || flip_prob > 1) throw ConfigError("flip_prob must be in [0, 1]");
    if (noise_std < 0) throw ConfigError("noise_std must be >= 0");
}

VideoClip preprocess_clip(const VideoClip& raw) {
    BBox box;
    if (raw.bbox) {
        box = *raw.bbox;
        if (box.x < 0 || box.y < 0 || box.w < 1 || box.h < 1 ||
            box.x + box.w > raw.width || box.y + box.h > raw.height) {
            throw InvalidBboxError("bbox outside frame bounds");
        }
    } else {
        const int side = std::min(raw.height, raw.width);
        box = {(raw.width - side) / 2, (raw.height - side) / 2, side, side};
    }
    VideoClip out = VideoClip::zeros(raw.frames, kPreprocessSize, kPreprocessSize, raw.fs);
    std::vector<float> cropped(static_cast<size_t>(3) * box.h * box.w);
    for (int t = 0; t < raw.frames; ++t) {
        crop_frame(raw.frame(t), raw.height, raw.width, box, cropped.data());
        resize_bilinear(cropped.data(), box.h, box.w, out.frame(t), kPreprocessSize,
                        kPreprocessSize);
    }
    return out;
}

namespace {

void flip_horizontal(float* frame, int h, int w) {
    for (int c = 0; c < 3; ++c) {
        float* plane = frame + static_cast<size_t>(c) * h * w;
        for (int y = 0; y < h; ++y) {
            std::reverse(plane + static_cast<size_t>(y) * w, plane + static_cast<size_t>(y) * w + w);
        }
    }
}

}  // namespace

ViewPair local_global_views(const VideoClip& x, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    if (x.height != kPreprocessSize || x.width != kPreprocessSize) {
        throw ShapeError("local_global_views expects a 151x151 preprocessed clip");
    }
    // Per-clip draws, in a fixed order so replay is bit-exact.
    const double area = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
    const int side = std::clamp(
        static_cast<int>(std::lround(std::sqrt(area) * kPreprocessSize)), 1, kPreprocessSize);
    const int ox = rng.uniform_int(0, kPreprocessSize - side);
    const int oy = rng.uniform_int(0, kPreprocessSize - side);
    const bool flip_local = rng.bernoulli(cfg.flip_prob);
    const bool flip_global = rng.bernoulli(cfg.flip_prob);
    std::vector<float> noise;
    if (cfg.noise_std > 0) {
        noise.resize(static_cast<size_t>(3) * kViewSize * kViewSize);
        for (auto& v : noise) v = static_cast<float>(rng.gaussian(0.0, cfg.noise_std));
    }

    ViewPair out;
    out.local = VideoClip::zeros(x.frames, kViewSize, kViewSize, x.fs);
    out.global = VideoClip::zeros(x.frames, kViewSize, kViewSize, x.fs);
    const BBox crop{ox, oy, side, side};
    std::vector<float> tmp(static_cast<size_t>(3) * side * side);
    for (int t = 0; t < x.frames; ++t) {
        crop_frame(x.frame(t), x.height, x.width, crop, tmp.data());
        resize_bilinear(tmp.data(), side, side, out.local.frame(t), kViewSize, kViewSize);
        resize_bilinear(x.frame(t), x.height, x.width, out.global.frame(t), kViewSize, kViewSize);
        if (flip_local) flip_horizontal(out.local.frame(t), kViewSize, kViewSize);
        if (flip_global) flip_horizontal(out.global.frame(t), kViewSize, kViewSize);
        if (!noise.empty()) {
            float* f = out.local.frame(t);
            for (size_t i = 0; i < noise.size(); ++i) f[i] += noise[i];
        }
    }
    return out;
}

DifferencePair masked_difference(const ViewPair& views, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    const int t_out = views.local.frames - 1;
    if (t_out < 1 || views.global.frames != views.local.frames) {
        throw ShapeError("masked_difference needs matching views with >= 2 frames");
    }
    DifferencePair out;
    out.mask_ratio_p = cfg.mask_ratio_p;
    out.masked = VideoClip::zeros(t_out, kViewSize, kViewSize, views.local.fs);
    out.original = VideoClip::zeros(t_out, kViewSize, kViewSize, views.global.fs);
    const size_t stride = views.local.frame_stride();
    out.mask.resize(static_cast<size_t>(t_out) * stride);
    for (auto& m : out.mask) m = rng.bernoulli(cfg.mask_ratio_p) ? 0 : 1;
    for (int t = 0; t < t_out; ++t) {
        const float* l0 = views.local.frame(t);
        const float* l1 = views.local.frame(t + 1);
        const float* g0 = views.global.frame(t);
        const float* g1 = views.global.frame(t + 1);
        float* dm = out.masked.frame(t);
        float* dg = out.original.frame(t);
        const uint8_t* m = out.mask.data() + static_cast<size_t>(t) * stride;
        for (size_t i = 0; i < stride; ++i) {
            dm[i] = m[i] ? l1[i] - l0[i] : 0.0f;
            dg[i] = g1[i] - g0[i];
        }
    }
    return out;
}

}  // namespace sspd::augment
