#pragma once

// End-to-end evaluation: per-clip HR estimation, aggregate metrics, plot-data
// emission and inference-cost benchmarking.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sspd/data.hpp"
#include "sspd/model.hpp"
#include "sspd/signal.hpp"

namespace sspd::eval {

struct ClipRow {
    std::string subject_id;
    std::string clip_id;
    int clip_index = 0;
    double hr_pred = 0;
    double hr_gt = 0;
    double abs_err = 0;
    bool failed = false;  // undetectable rhythm; excluded from aggregates
    std::string error;
};

struct CostTriple {
    long long params = 0;
    double flops = 0;
    double wall_ms = 0;
};

struct EvalReport {
    std::vector<ClipRow> rows;
    signal::HrMetrics aggregate;
    int failed_clips = 0;
    CostTriple cost;
};

// Deterministic clean path: preprocess -> global view -> frame differences.
VideoClip eval_view_differences(const VideoClip& clip);

// Runs the target network over every 30 s eval clip of every record.
EvalReport evaluate(model::Network<float>& net, const std::vector<data::DatasetRecord>& dataset);

// Recomputes aggregates from rows; throws if they disagree with the stored
// values beyond 1e-9 (used as a save-time consistency check).
signal::HrMetrics recompute_aggregate(const EvalReport& report);

void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

// scatter.csv, bland_altman.csv (+ bias/limits), rendered png images.
void emit_plots(const EvalReport& report, const std::filesystem::path& out_dir);

// Mean wall time over `repeats` runs at (frames+1) x 128 x 128, timing the
// frame-difference step together with the network forward pass.
CostTriple benchmark_inference(model::Network<float>& net, int frames = 300, int repeats = 10);

// Full inference on one raw clip: returns the predicted rPPG at clip fs.
signal::RealSignal infer_clip(model::Network<float>& net, const VideoClip& clip);

}  // namespace sspd::eval
