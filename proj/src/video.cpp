#include "sspd/video.hpp"

#include <algorithm>
#include <cmath>

namespace sspd {

void resize_bilinear(const float* src, int sh, int sw, float* dst, int dh, int dw) {
    const float sy = static_cast<float>(sh) / dh;
    const float sx = static_cast<float>(sw) / dw;
    for (int c = 0; c < 3; ++c) {
        const float* sp = src + static_cast<size_t>(c) * sh * sw;
        float* dp = dst + static_cast<size_t>(c) * dh * dw;
        for (int y = 0; y < dh; ++y) {
            const float fy = (y + 0.5f) * sy - 0.5f;
            const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, sh - 1);
            const int y1 = std::min(y0 + 1, sh - 1);
            const float wy = std::clamp(fy - y0, 0.0f, 1.0f);
            for (int x = 0; x < dw; ++x) {
                const float fx = (x + 0.5f) * sx - 0.5f;
                const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, sw - 1);
                const int x1 = std::min(x0 + 1, sw - 1);
                const float wx = std::clamp(fx - x0, 0.0f, 1.0f);
                const float a = sp[y0 * sw + x0] * (1 - wx) + sp[y0 * sw + x1] * wx;
                const float b = sp[y1 * sw + x0] * (1 - wx) + sp[y1 * sw + x1] * wx;
                dp[y * dw + x] = a * (1 - wy) + b * wy;
            }
        }
    }
}

void crop_frame(const float* src, int sh, int sw, const BBox& box, float* dst) {
    for (int c = 0; c < 3; ++c) {
        const float* sp = src + static_cast<size_t>(c) * sh * sw;
        float* dp = dst + static_cast<size_t>(c) * box.h * box.w;
        for (int y = 0; y < box.h; ++y) {
            const float* row = sp + static_cast<size_t>(box.y + y) * sw + box.x;
            std::copy(row, row + box.w, dp + static_cast<size_t>(y) * box.w);
        }
    }
}

}  // namespace sspd
