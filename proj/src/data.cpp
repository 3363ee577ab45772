#include "sspd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "json.hpp"

namespace sspd::data {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthSpec::validate() const {
    if (hr_bpm < 40 || hr_bpm > 250) throw ConfigError("hr_bpm must lie in [40, 250]");
    if (fs <= 0) throw ConfigError("fs must be positive");
    if (duration_s <= 0) throw ConfigError("duration_s must be positive");
    if (height < 8 || width < 8) throw ConfigError("spatial size must be at least 8x8");
    if (skin_mask_fraction <= 0 || skin_mask_fraction > 1) {
        throw ConfigError("skin_mask_fraction must lie in (0, 1]");
    }
    if (pulse_amplitude <= 0) throw ConfigError("pulse_amplitude must be positive");
    if (noise_std < 0) throw ConfigError("noise_std must be non-negative");
}

Layout parse_layout(const std::string& name) {
    if (name == "generic") return Layout::kGeneric;
    if (name == "pure-style") return Layout::kPureStyle;
    if (name == "ubfc-style") return Layout::kUbfcStyle;
    throw ConfigError("unknown dataset layout: " + name);
}

// Asymmetric cardiac pulse: one raised-cosine systolic peak followed by a
// smaller diastolic bump tuned to merge into a shoulder (single local maximum
// per cycle, so peak-based HR estimation sees exactly one beat per cycle).
double pulse_shape(double u) {
    auto bump = [](double x, double c, double w) {
        const double d = x - c;
        if (std::abs(d) >= w / 2) return 0.0;
        return 0.5 * (1.0 + std::cos(2.0 * M_PI * d / w));
    };
    return bump(u, 0.18, 0.6) + 0.35 * bump(u, 0.46, 0.32);
}

namespace {

constexpr double kBase[3] = {0.55, 0.45, 0.35};    // RGB skin tone
constexpr double kPulseW[3] = {0.5, 1.0, 0.3};     // green carries the pulse

double quantize8(double v) {
    return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

}  // namespace

DatasetRecord synth_clip(const SynthSpec& spec) {
    spec.validate();
    const int frames = static_cast<int>(std::lround(spec.duration_s * spec.fs)) + 1;
    DatasetRecord rec;
    rec.clip = VideoClip::zeros(frames, spec.height, spec.width, spec.fs);
    Rng rng(spec.seed);

    // Smooth Gaussian "skin" region.
    const double sigma = 0.5 * spec.skin_mask_fraction * std::min(spec.height, spec.width);
    std::vector<double> mask(static_cast<size_t>(spec.height) * spec.width);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const double dy = y - (spec.height - 1) / 2.0;
            const double dx = x - (spec.width - 1) / 2.0;
            mask[static_cast<size_t>(y) * spec.width + x] =
                std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
    }

    signal::RealSignal ppg;
    ppg.fs = spec.fs;
    ppg.samples.resize(frames);
    for (int t = 0; t < frames; ++t) {
        const double ts = t / spec.fs;
        // Phase integrates the (possibly drifting) instantaneous rate.
        const double cycles = spec.hr_bpm * ts / 60.0 +
                              spec.drift_bpm_per_min * ts * ts / (2.0 * 3600.0);
        ppg.samples[t] = pulse_shape(cycles - std::floor(cycles));
    }

    for (int t = 0; t < frames; ++t) {
        float* frame = rec.clip.frame(t);
        const double p = ppg.samples[t];
        for (int c = 0; c < 3; ++c) {
            float* plane = frame + static_cast<size_t>(c) * rec.clip.plane_stride();
            for (int i = 0; i < spec.height * spec.width; ++i) {
                double v = kBase[c] + spec.pulse_amplitude * kPulseW[c] * mask[i] * p;
                if (spec.noise_std > 0) v += spec.noise_std * rng.gaussian(0.0, 1.0);
                plane[i] = static_cast<float>(quantize8(v));
            }
        }
    }

    rec.gt_ppg = std::move(ppg);
    rec.gt_hr_bpm = spec.hr_bpm;
    rec.subject_id = "synth";
    return rec;
}

namespace {

cv::Mat frame_to_bgr8(const VideoClip& clip, int t) {
    cv::Mat img(clip.height, clip.width, CV_8UC3);
    const float* f = clip.frame(t);
    const size_t ps = clip.plane_stride();
    for (int y = 0; y < clip.height; ++y) {
        auto* row = img.ptr<cv::Vec3b>(y);
        for (int x = 0; x < clip.width; ++x) {
            const size_t i = static_cast<size_t>(y) * clip.width + x;
            for (int c = 0; c < 3; ++c) {
                const float v = f[static_cast<size_t>(c) * ps + i];
                row[x][2 - c] = cv::saturate_cast<uchar>(std::lround(v * 255.0f));
            }
        }
    }
    return img;
}

void bgr8_to_frame(const cv::Mat& img, VideoClip& clip, int t) {
    float* f = clip.frame(t);
    const size_t ps = clip.plane_stride();
    for (int y = 0; y < clip.height; ++y) {
        const auto* row = img.ptr<cv::Vec3b>(y);
        for (int x = 0; x < clip.width; ++x) {
            const size_t i = static_cast<size_t>(y) * clip.width + x;
            for (int c = 0; c < 3; ++c) {
                f[static_cast<size_t>(c) * ps + i] = static_cast<float>(row[x][2 - c]) / 255.0f;
            }
        }
    }
}

std::string frame_name(int t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d.png", t);
    return buf;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open " + p.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::vector<double> split_floats(const std::string& line, const fs::path& ctx) {
    std::vector<double> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ParseError("non-numeric value in " + ctx.string());
        }
    }
    return out;
}

VideoClip load_frames_dir(const fs::path& dir, double fs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".png") files.push_back(e.path());
    }
    if (files.empty()) throw IoError("no png frames under " + dir.string());
    std::sort(files.begin(), files.end());
    cv::Mat first = cv::imread(files[0].string(), cv::IMREAD_COLOR);
    if (first.empty()) throw ParseError("unreadable image " + files[0].string());
    VideoClip clip = VideoClip::zeros(static_cast<int>(files.size()), first.rows, first.cols, fs);
    bgr8_to_frame(first, clip, 0);
    for (size_t t = 1; t < files.size(); ++t) {
        cv::Mat img = cv::imread(files[t].string(), cv::IMREAD_COLOR);
        if (img.empty() || img.rows != first.rows || img.cols != first.cols) {
            throw ParseError("bad or inconsistent image " + files[t].string());
        }
        bgr8_to_frame(img, clip, static_cast<int>(t));
    }
    return clip;
}

signal::RealSignal load_ppg_csv(const fs::path& p) {
    auto lines = read_lines(p);
    if (lines.empty()) throw ParseError("empty ppg file " + p.string());
    signal::RealSignal sig;
    std::vector<double> times;
    for (size_t i = 1; i < lines.size(); ++i) {  // skip header
        if (lines[i].empty()) continue;
        std::istringstream ss(lines[i]);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b)) {
            throw ParseError("malformed row in " + p.string());
        }
        try {
            times.push_back(std::stod(a));
            sig.samples.conservativeResize(sig.samples.size() + 1);
            sig.samples[sig.samples.size() - 1] = std::stod(b);
        } catch (const std::exception&) {
            throw ParseError("non-numeric row in " + p.string());
        }
    }
    if (times.size() < 2) throw ParseError("too few samples in " + p.string());
    for (size_t i = 1; i < times.size(); ++i) {
        if (times[i] <= times[i - 1]) {
            throw ParseError("non-monotonic time column in " + p.string());
        }
    }
    sig.fs = (static_cast<double>(times.size()) - 1) / (times.back() - times.front());
    return sig;
}

DatasetRecord load_generic_record(const fs::path& dir, double manifest_fs) {
    DatasetRecord rec;
    rec.clip_id = dir.filename().string();
    rec.subject_id = rec.clip_id;
    double fs = manifest_fs;
    if (fs::exists(dir / "ppg.csv")) {
        rec.gt_ppg = load_ppg_csv(dir / "ppg.csv");
        if (fs <= 0) fs = rec.gt_ppg->fs;
    }
    if (fs <= 0) throw ParseError("sampling rate unknown for " + dir.string() +
                                  " (no manifest entry and no ppg.csv)");
    rec.clip = load_frames_dir(dir / "frames", fs);
    if (rec.gt_ppg) rec.gt_ppg->fs = fs;
    if (fs::exists(dir / "hr.csv")) {
        auto lines = read_lines(dir / "hr.csv");
        if (lines.size() >= 2) {
            try {
                rec.gt_hr_bpm = std::stod(lines[1]);
            } catch (const std::exception&) {
                throw ParseError("non-numeric hr in " + (dir / "hr.csv").string());
            }
        }
    }
    if (rec.gt_ppg) {
        const double clip_dur = (rec.clip.frames - 1) / fs;
        const double ppg_dur = (static_cast<double>(rec.gt_ppg->samples.size()) - 1) / fs;
        if (std::abs(clip_dur - ppg_dur) > 1.0 / fs + 1e-9) {
            throw ParseError("ppg/clip duration mismatch in " + dir.string());
        }
    }
    return rec;
}

// pure-style: per-frame Image*.png plus a json file carrying
// /FullPackage[].Value waveform samples.
DatasetRecord load_pure_record(const fs::path& dir) {
    fs::path meta;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json" && e.path().filename() != "manifest.json") {
            meta = e.path();
        }
    }
    DatasetRecord rec;
    rec.clip_id = dir.filename().string();
    rec.subject_id = rec.clip_id;
    double fs = 30.0;
    if (!meta.empty()) {
        std::ifstream in(meta);
        json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw ParseError("bad json in " + meta.string() + ": " + e.what());
        }
        if (j.contains("/FullPackage")) {
            const auto& pkg = j["/FullPackage"];
            signal::RealSignal sig;
            sig.samples.resize(static_cast<Eigen::Index>(pkg.size()));
            double t0 = 0, t1 = 0;
            for (size_t i = 0; i < pkg.size(); ++i) {
                sig.samples[static_cast<Eigen::Index>(i)] =
                    pkg[i].value("Value", json(0.0)).get<double>();
                const double ts = pkg[i].value("Timestamp", json(0.0)).get<double>();
                if (i == 0) t0 = ts;
                t1 = ts;
            }
            if (pkg.size() > 1 && t1 > t0) {
                // PURE timestamps are nanoseconds.
                sig.fs = (static_cast<double>(pkg.size()) - 1) / ((t1 - t0) * 1e-9);
                fs = sig.fs;
            }
            rec.gt_ppg = std::move(sig);
        }
    }
    rec.clip = load_frames_dir(dir, fs);
    return rec;
}

// ubfc-style: ground_truth.txt with three whitespace rows (ppg, hr,
// timestamps) next to pre-decoded frames/ png images.
DatasetRecord load_ubfc_record(const fs::path& dir) {
    const fs::path gt = dir / "ground_truth.txt";
    if (!fs::exists(gt)) throw IoError("missing " + gt.string());
    auto lines = read_lines(gt);
    if (lines.size() < 3) throw ParseError("expected 3 rows in " + gt.string());
    auto ppg_vals = split_floats(lines[0], gt);
    auto hr_vals = split_floats(lines[1], gt);
    auto ts_vals = split_floats(lines[2], gt);
    if (ppg_vals.size() < 2 || ts_vals.size() != ppg_vals.size()) {
        throw ParseError("inconsistent row lengths in " + gt.string());
    }
    DatasetRecord rec;
    rec.clip_id = dir.filename().string();
    rec.subject_id = rec.clip_id;
    signal::RealSignal sig;
    sig.fs = (static_cast<double>(ts_vals.size()) - 1) / (ts_vals.back() - ts_vals.front());
    sig.samples.resize(static_cast<Eigen::Index>(ppg_vals.size()));
    for (size_t i = 0; i < ppg_vals.size(); ++i) {
        sig.samples[static_cast<Eigen::Index>(i)] = ppg_vals[i];
    }
    rec.gt_ppg = std::move(sig);
    if (!hr_vals.empty()) {
        double s = 0;
        for (double v : hr_vals) s += v;
        rec.gt_hr_bpm = s / static_cast<double>(hr_vals.size());
    }
    const fs::path frames = fs::exists(dir / "frames") ? dir / "frames" : dir;
    rec.clip = load_frames_dir(frames, rec.gt_ppg->fs);
    return rec;
}

}  // namespace

void save_record_generic(const DatasetRecord& record, const fs::path& root) {
    const fs::path dir = root / record.clip_id;
    fs::create_directories(dir / "frames");
    for (int t = 0; t < record.clip.frames; ++t) {
        const fs::path p = dir / "frames" / frame_name(t);
        if (!cv::imwrite(p.string(), frame_to_bgr8(record.clip, t))) {
            throw IoError("failed to write " + p.string());
        }
    }
    if (record.gt_ppg) {
        std::ofstream out(dir / "ppg.csv");
        out << "time_s,ppg\n";
        out.precision(17);
        for (Eigen::Index i = 0; i < record.gt_ppg->samples.size(); ++i) {
            out << (static_cast<double>(i) / record.gt_ppg->fs) << ","
                << record.gt_ppg->samples[i] << "\n";
        }
    }
    if (record.gt_hr_bpm) {
        std::ofstream out(dir / "hr.csv");
        out << "hr_bpm\n" << *record.gt_hr_bpm << "\n";
    }
}

void write_manifest(const fs::path& root) {
    json records = json::array();
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory() && fs::exists(e.path() / "frames")) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        int frames = 0;
        for (const auto& f : fs::directory_iterator(dir / "frames")) {
            if (f.path().extension() == ".png") ++frames;
        }
        double fs = 0;
        if (fs::exists(dir / "ppg.csv")) fs = load_ppg_csv(dir / "ppg.csv").fs;
        json r;
        r["id"] = dir.filename().string();
        r["frames"] = frames;
        r["fs"] = fs;
        r["duration_s"] = fs > 0 ? (frames - 1) / fs : 0.0;
        records.push_back(r);
    }
    json m;
    m["records"] = records;
    std::ofstream out(root / "manifest.json");
    out << m.dump(2) << "\n";
}

std::vector<DatasetRecord> load_dataset(const fs::path& root, Layout layout) {
    if (!fs::exists(root)) throw IoError("dataset root does not exist: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::map<std::string, double> manifest_fs;
    if (fs::exists(root / "manifest.json")) {
        std::ifstream in(root / "manifest.json");
        json m;
        try {
            in >> m;
        } catch (const std::exception& e) {
            throw ParseError("bad manifest.json: " + std::string(e.what()));
        }
        for (const auto& r : m.value("records", json::array())) {
            manifest_fs[r.value("id", "")] = r.value("fs", 0.0);
        }
    }
    std::vector<DatasetRecord> out;
    for (const auto& dir : dirs) {
        switch (layout) {
            case Layout::kGeneric: {
                if (!fs::exists(dir / "frames")) continue;
                auto it = manifest_fs.find(dir.filename().string());
                out.push_back(load_generic_record(dir, it == manifest_fs.end() ? 0.0 : it->second));
                break;
            }
            case Layout::kPureStyle:
                out.push_back(load_pure_record(dir));
                break;
            case Layout::kUbfcStyle:
                out.push_back(load_ubfc_record(dir));
                break;
        }
    }
    return out;
}

VideoClip sample_training_clip(const DatasetRecord& record, Rng& rng, double clip_s) {
    const int need = static_cast<int>(std::lround(clip_s * record.clip.fs)) + 1;
    if (record.clip.frames < need) {
        throw ShapeError("record " + record.clip_id + " shorter than training clip length");
    }
    const int max_off = record.clip.frames - need;
    const int off = max_off > 0 ? static_cast<int>(rng.uniform_int(0, max_off)) : 0;
    VideoClip out = VideoClip::zeros(need, record.clip.height, record.clip.width, record.clip.fs);
    out.bbox = record.clip.bbox;
    std::copy_n(record.clip.frame(off), static_cast<size_t>(need) * out.frame_stride(),
                out.data.begin());
    return out;
}

std::vector<VideoClip> eval_clips(const DatasetRecord& record, double clip_s) {
    const int step = static_cast<int>(std::lround(clip_s * record.clip.fs));
    const double duration = (record.clip.frames - 1) / record.clip.fs;
    const int n = static_cast<int>(std::floor(duration / clip_s));
    std::vector<VideoClip> out;
    if (n == 0) {
        std::cerr << "warning: record " << record.clip_id << " shorter than " << clip_s
                  << " s, skipped\n";
        return out;
    }
    for (int i = 0; i < n; ++i) {
        VideoClip c =
            VideoClip::zeros(step + 1, record.clip.height, record.clip.width, record.clip.fs);
        c.bbox = record.clip.bbox;
        std::copy_n(record.clip.frame(i * step), static_cast<size_t>(step + 1) * c.frame_stride(),
                    c.data.begin());
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace sspd::data
