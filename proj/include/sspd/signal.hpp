#pragma once

// Pure numerical kernel: tokenization, self-similarity maps/waves, spectra,
// band SNR, Pearson distance, peak-based HR and HR metrics. No learned
// parameters, no shared state; every function is safe to call concurrently.

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "sspd/errors.hpp"

namespace sspd::signal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct RealSignal {
    Vec samples;   // length T >= 2, finite
    double fs = 0; // Hz, > 0

    int length() const { return static_cast<int>(samples.size()); }
    double duration_s() const { return samples.size() / fs; }
};

// T_i x C matrix of stride-1 temporal tokens (token = row).
struct TokenSequence {
    Mat tokens;
    int scale_index = 0;

    int count() const { return static_cast<int>(tokens.rows()); }
    int dim() const { return static_cast<int>(tokens.cols()); }
};

// Pairwise cosine similarities; symmetric, unit diagonal, entries in [-1, 1].
struct SelfSimilarityMap {
    Mat values;

    int size() const { return static_cast<int>(values.rows()); }
};

// values[t] = mean of the upper-triangle diagonal at lag t (values[0] == 1).
struct SelfSimilarityWave {
    Vec values;

    int size() const { return static_cast<int>(values.size()); }
};

// One-sided normalized power spectrum over bins (0, fs/2]; density sums to 1.
struct PowerSpectrum {
    Vec freqs;
    Vec density;
};

struct HrMetrics {
    double mae = 0;
    double rmse = 0;
    double sd = 0;                // population SD of signed errors
    std::optional<double> r;      // absent when either list has zero variance
};

TokenSequence tokenize(const RealSignal& sig, int window);
SelfSimilarityMap self_similarity_map(const TokenSequence& tokens);
SelfSimilarityWave self_similarity_wave(const SelfSimilarityMap& map);

PowerSpectrum normalized_psd(const RealSignal& sig);

inline constexpr double kHrBandLoHz = 0.65;
inline constexpr double kHrBandHiHz = 3.0;
inline constexpr double kSnrGuard = 1e-8;

double band_snr(const PowerSpectrum& spec, double band_lo = kHrBandLoHz,
                double band_hi = kHrBandHiHz);

double negative_pearson(const RealSignal& x, const RealSignal& y);

// Local maxima with minimum separation floor(fs*60/250); indices ascending.
std::vector<int> detect_peaks(const RealSignal& sig);

struct HrOptions {
    bool bandpass = false;  // optional 0.65-3 Hz band-pass before peak picking
};

double estimate_hr_from_peaks(const RealSignal& rppg, const HrOptions& opt = {});

// Zero all DFT bins outside [lo, hi] Hz and reconstruct.
RealSignal bandpass_filter(const RealSignal& sig, double lo = kHrBandLoHz,
                           double hi = kHrBandHiHz);

HrMetrics hr_metrics(const std::vector<double>& pred, const std::vector<double>& gt);

}  // namespace sspd::signal
