#pragma once

// Physical-prior embedded augmentation: clip preprocessing, local-global view
// generation (LGA) and masked difference modeling (MDM).

#include <cstdint>
#include <vector>

#include "sspd/rng.hpp"
#include "sspd/video.hpp"

namespace sspd::augment {

inline constexpr int kPreprocessSize = 151;
inline constexpr int kViewSize = 128;

struct AugmentConfig {
    double mask_ratio_p = 0.3;   // Bernoulli zero probability in MDM
    double crop_scale_min = 0.7; // area fraction for random resized crop
    double crop_scale_max = 1.0;
    double flip_prob = 0.5;
    double noise_std = 0.02;     // Gaussian pixel noise, [0,1] units
    uint64_t seed = 0;

    void validate() const;
};

// Both views share (T+1) x 3 x 128 x 128.
struct ViewPair {
    VideoClip local;
    VideoClip global;
};

struct DifferencePair {
    VideoClip masked;          // T x 3 x 128 x 128, m_p (.) local diff
    VideoClip original;        // T x 3 x 128 x 128, global diff
    std::vector<uint8_t> mask; // 1 = kept, 0 = forced zero; same layout as masked
    double mask_ratio_p = 0;
};

// Crop to bbox from the first frame (held fixed across all frames), else the
// largest centered square; bilinear-resize every frame to 151x151.
VideoClip preprocess_clip(const VideoClip& raw);

// Local view: random resized crop to 128 + optional flip + additive Gaussian
// noise. Global view: plain resize to 128 + optional flip. Each transform
// parameter (crop window, flips, noise field) is drawn once per clip and
// applied identically to all frames.
ViewPair local_global_views(const VideoClip& preprocessed, const AugmentConfig& cfg, Rng& rng);

// First forward differences of both views; local differences get an
// elementwise Bernoulli mask (zero with probability p).
DifferencePair masked_difference(const ViewPair& views, const AugmentConfig& cfg, Rng& rng);

}  // namespace sspd::augment
