#include "sspd/eval.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json.hpp"

#include "sspd/augment.hpp"
#include "sspd/distill.hpp"

namespace sspd::eval {

using nlohmann::json;

VideoClip eval_view_differences(const VideoClip& clip) {
    VideoClip pre = augment::preprocess_clip(clip);
    VideoClip view =
        VideoClip::zeros(pre.frames, augment::kViewSize, augment::kViewSize, pre.fs);
    for (int t = 0; t < pre.frames; ++t) {
        resize_bilinear(pre.frame(t), pre.height, pre.width, view.frame(t), augment::kViewSize,
                        augment::kViewSize);
    }
    VideoClip diff =
        VideoClip::zeros(view.frames - 1, view.height, view.width, view.fs);
    const size_t n = diff.frame_stride();
    for (int t = 0; t < diff.frames; ++t) {
        const float* a = view.frame(t);
        const float* b = view.frame(t + 1);
        float* d = diff.frame(t);
        for (size_t i = 0; i < n; ++i) d[i] = b[i] - a[i];
    }
    return diff;
}

signal::RealSignal infer_clip(model::Network<float>& net, const VideoClip& clip) {
    VideoClip diff = eval_view_differences(clip);
    nn::Tens<float> x = distill::to_tens<float>(diff);
    nn::Vx<float> y = net.inference(std::move(x));
    signal::RealSignal out;
    out.fs = clip.fs;
    out.samples = y.cast<double>();
    return out;
}

namespace {

double gt_hr_for_window(const data::DatasetRecord& rec, int start, int len) {
    if (rec.gt_ppg) {
        signal::RealSignal seg;
        seg.fs = rec.gt_ppg->fs;
        seg.samples = rec.gt_ppg->samples.segment(start, len);
        return signal::estimate_hr_from_peaks(seg, {});
    }
    if (rec.gt_hr_bpm) return *rec.gt_hr_bpm;
    throw ConfigError("dataset record " + rec.clip_id +
                      " has no ground truth; use the infer command instead");
}

}  // namespace

EvalReport evaluate(model::Network<float>& net, const std::vector<data::DatasetRecord>& dataset) {
    EvalReport report;
    signal::HrOptions pred_opts;
    pred_opts.bandpass = true;  // raw network output carries out-of-band noise
    for (const auto& rec : dataset) {
        if (!rec.gt_ppg && !rec.gt_hr_bpm) {
            throw ConfigError("dataset record " + rec.clip_id +
                              " has no ground truth; use the infer command instead");
        }
        auto clips = data::eval_clips(rec);
        const int step = static_cast<int>(std::lround(30.0 * rec.clip.fs));
        for (size_t i = 0; i < clips.size(); ++i) {
            ClipRow row;
            row.subject_id = rec.subject_id;
            row.clip_id = rec.clip_id;
            row.clip_index = static_cast<int>(i);
            row.hr_gt = gt_hr_for_window(rec, static_cast<int>(i) * step, step + 1);
            try {
                signal::RealSignal pred = infer_clip(net, clips[i]);
                row.hr_pred = signal::estimate_hr_from_peaks(pred, pred_opts);
                row.abs_err = std::abs(row.hr_pred - row.hr_gt);
            } catch (const InsufficientPeaksError& e) {
                row.failed = true;
                row.error = e.what();
                ++report.failed_clips;
            }
            report.rows.push_back(std::move(row));
        }
    }
    report.aggregate = recompute_aggregate(report);
    report.cost.params = net.count_cost(300).params_inference;
    report.cost.flops = net.count_cost(300).flops_inference;
    return report;
}

signal::HrMetrics recompute_aggregate(const EvalReport& report) {
    std::vector<double> pred, gt;
    for (const auto& r : report.rows) {
        if (r.failed) continue;
        pred.push_back(r.hr_pred);
        gt.push_back(r.hr_gt);
    }
    if (pred.empty()) throw InsufficientPeaksError("no successful eval clips");
    return signal::hr_metrics(pred, gt);
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
    signal::HrMetrics check = recompute_aggregate(report);
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
    if (!close(check.mae, report.aggregate.mae) || !close(check.rmse, report.aggregate.rmse) ||
        !close(check.sd, report.aggregate.sd) ||
        check.r.has_value() != report.aggregate.r.has_value() ||
        (check.r && !close(*check.r, *report.aggregate.r))) {
        throw ShapeError("eval report aggregates disagree with rows");
    }
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"subject_id", r.subject_id},
                        {"clip_id", r.clip_id},
                        {"clip_index", r.clip_index},
                        {"hr_pred", r.hr_pred},
                        {"hr_gt", r.hr_gt},
                        {"abs_err", r.abs_err},
                        {"failed", r.failed},
                        {"error", r.error}});
    }
    json j;
    j["rows"] = rows;
    j["aggregate"] = {{"mae", report.aggregate.mae},
                      {"rmse", report.aggregate.rmse},
                      {"sd", report.aggregate.sd}};
    if (report.aggregate.r) j["aggregate"]["r"] = *report.aggregate.r;
    j["failed_clips"] = report.failed_clips;
    j["cost"] = {{"params", report.cost.params},
                 {"flops", report.cost.flops},
                 {"wall_ms", report.cost.wall_ms}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

EvalReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("bad report json: " + std::string(e.what()));
    }
    EvalReport report;
    for (const auto& r : j.at("rows")) {
        ClipRow row;
        row.subject_id = r.at("subject_id").get<std::string>();
        row.clip_id = r.at("clip_id").get<std::string>();
        row.clip_index = r.at("clip_index").get<int>();
        row.hr_pred = r.at("hr_pred").get<double>();
        row.hr_gt = r.at("hr_gt").get<double>();
        row.abs_err = r.at("abs_err").get<double>();
        row.failed = r.at("failed").get<bool>();
        row.error = r.at("error").get<std::string>();
        report.rows.push_back(std::move(row));
    }
    report.aggregate.mae = j.at("aggregate").at("mae").get<double>();
    report.aggregate.rmse = j.at("aggregate").at("rmse").get<double>();
    report.aggregate.sd = j.at("aggregate").at("sd").get<double>();
    if (j.at("aggregate").contains("r")) report.aggregate.r = j["aggregate"]["r"].get<double>();
    report.failed_clips = j.at("failed_clips").get<int>();
    report.cost.params = j.at("cost").at("params").get<long long>();
    report.cost.flops = j.at("cost").at("flops").get<double>();
    report.cost.wall_ms = j.at("cost").at("wall_ms").get<double>();
    return report;
}

namespace {

// Simple scatter render: white canvas, axes box, one dot per point.
void render_scatter(const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::filesystem::path& path, const std::string& xlabel,
                    const std::string& ylabel, bool identity_line) {
    const int size = 640, margin = 60;
    cv::Mat img(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
    double lo = 1e300, hi = -1e300;
    for (size_t i = 0; i < xs.size(); ++i) {
        lo = std::min({lo, xs[i], ys[i]});
        hi = std::max({hi, xs[i], ys[i]});
    }
    if (hi <= lo) {
        lo -= 1;
        hi += 1;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto px = [&](double v) {
        return margin + static_cast<int>((v - lo) / (hi - lo) * (size - 2 * margin));
    };
    auto py = [&](double v) {
        return size - margin - static_cast<int>((v - lo) / (hi - lo) * (size - 2 * margin));
    };
    cv::rectangle(img, {margin, margin}, {size - margin, size - margin}, {0, 0, 0}, 1);
    if (identity_line) {
        cv::line(img, {px(lo), py(lo)}, {px(hi), py(hi)}, {200, 200, 200}, 1);
    }
    for (size_t i = 0; i < xs.size(); ++i) {
        cv::circle(img, {px(xs[i]), py(ys[i])}, 3, {180, 60, 20}, cv::FILLED);
    }
    cv::putText(img, xlabel, {size / 2 - 60, size - 20}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                {0, 0, 0});
    cv::putText(img, ylabel, {10, size / 2}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0});
    if (!cv::imwrite(path.string(), img)) throw IoError("failed to write " + path.string());
}

}  // namespace

void emit_plots(const EvalReport& report, const std::filesystem::path& out_dir) {
    std::vector<double> gt, pred;
    for (const auto& r : report.rows) {
        if (r.failed) continue;
        gt.push_back(r.hr_gt);
        pred.push_back(r.hr_pred);
    }
    if (gt.empty()) throw ShapeError("cannot plot an empty report");
    std::filesystem::create_directories(out_dir);

    {
        std::ofstream out(out_dir / "scatter.csv");
        out.precision(17);
        out << "hr_gt,hr_pred\n";
        for (size_t i = 0; i < gt.size(); ++i) out << gt[i] << "," << pred[i] << "\n";
    }

    // Bland-Altman: mean vs difference, bias and +/- 1.96 population SD.
    std::vector<double> means(gt.size()), diffs(gt.size());
    double bias = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        means[i] = (pred[i] + gt[i]) / 2.0;
        diffs[i] = pred[i] - gt[i];
        bias += diffs[i];
    }
    bias /= static_cast<double>(diffs.size());
    double var = 0;
    for (double d : diffs) var += (d - bias) * (d - bias);
    var /= static_cast<double>(diffs.size());
    const double sd = std::sqrt(var);
    {
        std::ofstream out(out_dir / "bland_altman.csv");
        out.precision(17);
        out << "mean,diff\n";
        for (size_t i = 0; i < means.size(); ++i) out << means[i] << "," << diffs[i] << "\n";
        out << "bias," << bias << "\n";
        out << "limit_lo," << (bias - 1.96 * sd) << "\n";
        out << "limit_hi," << (bias + 1.96 * sd) << "\n";
    }

    render_scatter(gt, pred, out_dir / "scatter.png", "hr_gt (bpm)", "hr_pred (bpm)", true);
    render_scatter(means, diffs, out_dir / "bland_altman.png", "mean (bpm)", "diff (bpm)", false);
}

CostTriple benchmark_inference(model::Network<float>& net, int frames, int repeats) {
    CostTriple cost;
    const auto report = net.count_cost(frames);
    cost.params = report.params_inference;
    cost.flops = report.flops_inference;
    const int side = net.cfg.backbone.input_size;
    VideoClip clip = VideoClip::zeros(frames + 1, side, side, 30.0);
    Rng rng(12345);
    for (auto& v : clip.data) v = static_cast<float>(rng.uniform());
    double total_ms = 0;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        VideoClip diff = VideoClip::zeros(frames, side, side, clip.fs);
        const size_t n = diff.frame_stride();
        for (int t = 0; t < frames; ++t) {
            const float* a = clip.frame(t);
            const float* b = clip.frame(t + 1);
            float* d = diff.frame(t);
            for (size_t i = 0; i < n; ++i) d[i] = b[i] - a[i];
        }
        nn::Tens<float> x = distill::to_tens<float>(diff);
        nn::Vx<float> y = net.inference(std::move(x));
        (void)y;
        const auto t1 = std::chrono::steady_clock::now();
        total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    cost.wall_ms = total_ms / repeats;
    return cost;
}

}  // namespace sspd::eval
