#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sspd/errors.hpp"

namespace sspd {

struct BBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

// Planar float video, values in [0,1], layout (frames, 3, H, W) contiguous.
struct VideoClip {
    std::vector<float> data;
    int frames = 0;
    int height = 0;
    int width = 0;
    double fs = 0;
    std::optional<BBox> bbox;

    static VideoClip zeros(int frames, int h, int w, double fs) {
        VideoClip v;
        v.frames = frames;
        v.height = h;
        v.width = w;
        v.fs = fs;
        v.data.assign(static_cast<size_t>(frames) * 3 * h * w, 0.0f);
        return v;
    }

    size_t frame_stride() const { return static_cast<size_t>(3) * height * width; }
    size_t plane_stride() const { return static_cast<size_t>(height) * width; }

    float* frame(int t) { return data.data() + t * frame_stride(); }
    const float* frame(int t) const { return data.data() + t * frame_stride(); }

    float& at(int t, int c, int y, int x) {
        return data[t * frame_stride() + c * plane_stride() + static_cast<size_t>(y) * width + x];
    }
    float at(int t, int c, int y, int x) const {
        return data[t * frame_stride() + c * plane_stride() + static_cast<size_t>(y) * width + x];
    }
};

// Bilinear resample of one planar 3xHxW frame into dst (3 x dh x dw).
// Uses half-pixel centers, clamped borders.
void resize_bilinear(const float* src, int sh, int sw, float* dst, int dh, int dw);

// Crop (x, y, w, h) from a planar frame into dst (3 x h x w).
void crop_frame(const float* src, int sh, int sw, const BBox& box, float* dst);

}  // namespace sspd
