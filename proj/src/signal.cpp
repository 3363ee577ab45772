#include "sspd/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace sspd::signal {

TokenSequence tokenize(const RealSignal& sig, int window) {
    const int t = sig.length();
    if (window < 1 || window > t) {
        throw InvalidWindowError("token window " + std::to_string(window) +
                                 " outside [1, " + std::to_string(t) + "]");
    }
    const int n = t - window + 1;
    TokenSequence out;
    out.tokens.resize(n, window);
    for (int i = 0; i < n; ++i) {
        out.tokens.row(i) = sig.samples.segment(i, window).transpose();
    }
    return out;
}

SelfSimilarityMap self_similarity_map(const TokenSequence& tokens) {
    const int n = tokens.count();
    Mat unit(n, tokens.dim());
    for (int i = 0; i < n; ++i) {
        const double norm = tokens.tokens.row(i).norm();
        if (norm <= 0.0) {
            throw DegenerateTokenError("token " + std::to_string(i) + " has zero norm");
        }
        unit.row(i) = tokens.tokens.row(i) / norm;
    }
    SelfSimilarityMap map;
    map.values.resize(n, n);
    // Fill one triangle and mirror so symmetry is exact.
    for (int i = 0; i < n; ++i) {
        map.values(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            const double v = unit.row(i).dot(unit.row(j));
            map.values(i, j) = v;
            map.values(j, i) = v;
        }
    }
    return map;
}

SelfSimilarityWave self_similarity_wave(const SelfSimilarityMap& map) {
    const int n = map.size();
    SelfSimilarityWave wave;
    wave.values.resize(n);
    for (int lag = 0; lag < n; ++lag) {
        double sum = 0;
        for (int j = 0; j + lag < n; ++j) sum += map.values(j, j + lag);
        wave.values(lag) = sum / (n - lag);
    }
    return wave;
}

PowerSpectrum normalized_psd(const RealSignal& sig) {
    const int t = sig.length();
    if (t < 4) throw ShapeError("normalized_psd needs T >= 4");
    const Vec x = sig.samples.array() - sig.samples.mean();
    const int bins = t / 2;
    PowerSpectrum spec;
    spec.freqs.resize(bins);
    spec.density.resize(bins);
    double total = 0;
    for (int k = 1; k <= bins; ++k) {
        std::complex<double> acc(0, 0);
        for (int n = 0; n < t; ++n) {
            const double ang = -2.0 * M_PI * k * n / t;
            acc += x[n] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        spec.freqs[k - 1] = k * sig.fs / t;
        spec.density[k - 1] = std::norm(acc);
        total += spec.density[k - 1];
    }
    if (total <= 1e-24) {
        throw ZeroPowerError("signal has no power after mean removal");
    }
    spec.density /= total;
    return spec;
}

double band_snr(const PowerSpectrum& spec, double band_lo, double band_hi) {
    double in_band = 0;
    double all = 0;
    int hits = 0;
    for (int k = 0; k < spec.freqs.size(); ++k) {
        all += spec.density[k];
        if (spec.freqs[k] >= band_lo && spec.freqs[k] <= band_hi) {
            in_band += spec.density[k];
            ++hits;
        }
    }
    if (hits == 0) {
        throw EmptyBandError("no spectrum bins inside [" + std::to_string(band_lo) +
                             ", " + std::to_string(band_hi) + "] Hz");
    }
    return in_band / (all - in_band + kSnrGuard);
}

double negative_pearson(const RealSignal& x, const RealSignal& y) {
    if (x.length() != y.length()) {
        throw ShapeError("negative_pearson length mismatch");
    }
    const Vec xc = x.samples.array() - x.samples.mean();
    const Vec yc = y.samples.array() - y.samples.mean();
    const double nx = xc.norm();
    const double ny = yc.norm();
    if (nx <= 0 || ny <= 0) {
        throw DegenerateCorrelationError("zero variance input to negative_pearson");
    }
    return 1.0 - xc.dot(yc) / (nx * ny);
}

std::vector<int> detect_peaks(const RealSignal& sig) {
    const int t = sig.length();
    const int min_sep = std::max(1, static_cast<int>(std::floor(sig.fs * 60.0 / 250.0)));
    std::vector<int> candidates;
    for (int i = 1; i + 1 < t; ++i) {
        if (sig.samples[i] > sig.samples[i - 1] && sig.samples[i] >= sig.samples[i + 1]) {
            candidates.push_back(i);
        }
    }
    // Greedy by height: tallest peaks claim their neighborhood first.
    std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
        if (sig.samples[a] != sig.samples[b]) return sig.samples[a] > sig.samples[b];
        return a < b;
    });
    std::vector<int> accepted;
    for (int c : candidates) {
        bool ok = true;
        for (int a : accepted) {
            if (std::abs(a - c) < min_sep) {
                ok = false;
                break;
            }
        }
        if (ok) accepted.push_back(c);
    }
    std::sort(accepted.begin(), accepted.end());
    return accepted;
}

RealSignal bandpass_filter(const RealSignal& sig, double lo, double hi) {
    const int t = sig.length();
    std::vector<std::complex<double>> spectrum(t);
    for (int k = 0; k < t; ++k) {
        std::complex<double> acc(0, 0);
        for (int n = 0; n < t; ++n) {
            const double ang = -2.0 * M_PI * k * n / t;
            acc += sig.samples[n] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        const double f = (k <= t / 2 ? k : k - t) * sig.fs / t;
        spectrum[k] = (std::abs(f) >= lo && std::abs(f) <= hi) ? acc : 0.0;
    }
    RealSignal out;
    out.fs = sig.fs;
    out.samples.resize(t);
    for (int n = 0; n < t; ++n) {
        std::complex<double> acc(0, 0);
        for (int k = 0; k < t; ++k) {
            const double ang = 2.0 * M_PI * k * n / t;
            acc += spectrum[k] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out.samples[n] = acc.real() / t;
    }
    return out;
}

double estimate_hr_from_peaks(const RealSignal& rppg, const HrOptions& opt) {
    const RealSignal& sig = rppg;
    RealSignal filtered;
    const RealSignal* use = &sig;
    if (opt.bandpass) {
        filtered = bandpass_filter(sig);
        use = &filtered;
    }
    const std::vector<int> peaks = detect_peaks(*use);
    if (peaks.size() < 2) {
        throw InsufficientPeaksError("found " + std::to_string(peaks.size()) +
                                     " peaks, need at least 2");
    }
    const double span_s = (peaks.back() - peaks.front()) / use->fs;
    const double mean_interval = span_s / (peaks.size() - 1);
    return 60.0 / mean_interval;
}

HrMetrics hr_metrics(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size() || pred.empty()) {
        throw ShapeError("hr_metrics needs equal nonzero-length lists");
    }
    const int n = static_cast<int>(pred.size());
    HrMetrics m;
    double se = 0;
    double err_sum = 0;
    for (int i = 0; i < n; ++i) {
        const double e = pred[i] - gt[i];
        m.mae += std::abs(e);
        se += e * e;
        err_sum += e;
    }
    m.mae /= n;
    m.rmse = std::sqrt(se / n);
    const double err_mean = err_sum / n;
    double var = 0;
    for (int i = 0; i < n; ++i) {
        const double d = pred[i] - gt[i] - err_mean;
        var += d * d;
    }
    m.sd = std::sqrt(var / n);

    double pm = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
    double gm = std::accumulate(gt.begin(), gt.end(), 0.0) / n;
    double num = 0, dp = 0, dg = 0;
    for (int i = 0; i < n; ++i) {
        num += (pred[i] - pm) * (gt[i] - gm);
        dp += (pred[i] - pm) * (pred[i] - pm);
        dg += (gt[i] - gm) * (gt[i] - gm);
    }
    if (dp > 0 && dg > 0) m.r = num / std::sqrt(dp * dg);
    return m;
}

}  // namespace sspd::signal
