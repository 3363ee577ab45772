#pragma once

// Dataset plumbing: synthetic pulsatile-video generation, on-disk ingestion
// (generic / pure-style / ubfc-style layouts) and train/eval clip sampling.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sspd/rng.hpp"
#include "sspd/signal.hpp"
#include "sspd/video.hpp"

namespace sspd::data {

struct SynthSpec {
    double hr_bpm = 70;
    double fs = 30;
    double duration_s = 30;
    int height = 64;
    int width = 64;
    double skin_mask_fraction = 0.5;  // Gaussian mask radius as fraction of min(H, W)
    double pulse_amplitude = 0.02;    // in [0,1] pixel units
    double noise_std = 0.0;           // white pixel noise, [0,1] units
    double drift_bpm_per_min = 0.0;
    uint64_t seed = 0;

    void validate() const;
};

struct DatasetRecord {
    VideoClip clip;
    std::optional<signal::RealSignal> gt_ppg;
    std::optional<double> gt_hr_bpm;
    std::string subject_id;
    std::string clip_id;
};

enum class Layout { kGeneric, kPureStyle, kUbfcStyle };

Layout parse_layout(const std::string& name);

// Evaluates the unit-amplitude pulse waveform at cycle phase u in [0, 1).
double pulse_shape(double u);

// Renders a synthetic clip plus its exact ground-truth PPG. Frames are
// quantized to the 8-bit grid at generation time so a save/load round trip
// through PNG reproduces them bit-exactly.
DatasetRecord synth_clip(const SynthSpec& spec);

// Writes one record into root/<clip_id>/ in the generic layout
// (frames/%06d.png, ppg.csv, optional hr.csv).
void save_record_generic(const DatasetRecord& record, const std::filesystem::path& root);

// Writes/refreshes manifest.json listing every record under root.
void write_manifest(const std::filesystem::path& root);

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& root, Layout layout);

// Uniform random 10 s window, returned as clip_train_s * fs + 1 frames.
VideoClip sample_training_clip(const DatasetRecord& record, Rng& rng, double clip_s = 10.0);

// Non-overlapping 30 s windows from the start; each carries one extra frame
// for differencing (shared with the next window's first frame).
std::vector<VideoClip> eval_clips(const DatasetRecord& record, double clip_s = 30.0);

}  // namespace sspd::data
