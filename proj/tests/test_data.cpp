#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sspd/data.hpp"

using namespace sspd;
using namespace sspd::data;
namespace fsys = std::filesystem;

namespace {

struct TempDir {
    fsys::path path;
    explicit TempDir(const std::string& tag) {
        path = fsys::temp_directory_path() / ("sspd_test_" + tag);
        fsys::remove_all(path);
        fsys::create_directories(path);
    }
    ~TempDir() { fsys::remove_all(path); }
};

}  // namespace

TEST_CASE("pulse shape has one maximum per cycle and a diastolic shoulder") {
    int maxima = 0;
    double prev2 = pulse_shape(0.0), prev = pulse_shape(0.0005);
    for (int i = 2; i < 2000; ++i) {
        const double v = pulse_shape(i * 0.0005);
        if (prev > prev2 && prev >= v && prev > 1e-9) ++maxima;
        prev2 = prev;
        prev = v;
    }
    CHECK(maxima == 1);
    // The diastolic bump flattens the decay near u = 0.41 without reversing it.
    const double slope_mid = pulse_shape(0.34) - pulse_shape(0.32);
    const double slope_dia = pulse_shape(0.425) - pulse_shape(0.405);
    CHECK(slope_mid < 0.0);
    CHECK(slope_dia < 0.0);
    CHECK(std::abs(slope_dia) < 0.25 * std::abs(slope_mid));
}

TEST_CASE("synthetic clip peak oracle and hr round trip") {
    SynthSpec spec;
    spec.hr_bpm = 60;
    spec.fs = 30;
    spec.duration_s = 10;
    spec.seed = 1;
    DatasetRecord rec = synth_clip(spec);
    REQUIRE(rec.gt_ppg.has_value());
    CHECK(rec.clip.frames == 301);
    CHECK(rec.gt_ppg->samples.size() == 301);
    const auto peaks = signal::detect_peaks(*rec.gt_ppg);
    CHECK(peaks.size() >= 9);
    CHECK(peaks.size() <= 11);
    for (double hr : {48.0, 72.0, 119.5}) {
        SynthSpec s2 = spec;
        s2.hr_bpm = hr;
        s2.duration_s = 30;
        DatasetRecord r2 = synth_clip(s2);
        CHECK(std::abs(signal::estimate_hr_from_peaks(*r2.gt_ppg, {}) - hr) < 2.0);
    }
}

TEST_CASE("noise-free skin-region intensity tracks the ppg") {
    SynthSpec spec;
    spec.hr_bpm = 75;
    spec.fs = 30;
    spec.duration_s = 10;
    spec.noise_std = 0.0;
    spec.seed = 2;
    DatasetRecord rec = synth_clip(spec);
    // Mean green intensity over the central (skin) quarter of the frame.
    signal::RealSignal mean_px;
    mean_px.fs = spec.fs;
    mean_px.samples.resize(rec.clip.frames);
    for (int t = 0; t < rec.clip.frames; ++t) {
        double s = 0;
        int n = 0;
        for (int y = spec.height / 4; y < 3 * spec.height / 4; ++y) {
            for (int x = spec.width / 4; x < 3 * spec.width / 4; ++x) {
                s += rec.clip.at(t, 1, y, x);
                ++n;
            }
        }
        mean_px.samples[t] = s / n;
    }
    const double npl = signal::negative_pearson(mean_px, *rec.gt_ppg);
    CHECK(std::abs(1.0 - npl) > 0.99);  // |r| > 0.99
}

TEST_CASE("same seed gives bit-identical frames") {
    SynthSpec spec;
    spec.duration_s = 3;
    spec.noise_std = 0.01;
    spec.seed = 42;
    DatasetRecord a = synth_clip(spec);
    DatasetRecord b = synth_clip(spec);
    CHECK(a.clip.data == b.clip.data);
    spec.seed = 43;
    DatasetRecord c = synth_clip(spec);
    CHECK(a.clip.data != c.clip.data);
}

TEST_CASE("generic layout round trip is bit exact") {
    TempDir tmp("generic_rt");
    SynthSpec spec;
    spec.duration_s = 3;
    spec.noise_std = 0.01;
    spec.seed = 7;
    DatasetRecord rec = synth_clip(spec);
    rec.clip_id = "rec000";
    save_record_generic(rec, tmp.path);
    write_manifest(tmp.path);
    auto loaded = load_dataset(tmp.path, Layout::kGeneric);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].clip_id == "rec000");
    CHECK(loaded[0].clip.frames == rec.clip.frames);
    CHECK(loaded[0].clip.data == rec.clip.data);  // 8-bit grid at synth time
    REQUIRE(loaded[0].gt_ppg.has_value());
    CHECK((loaded[0].gt_ppg->samples - rec.gt_ppg->samples).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded[0].gt_ppg->fs == doctest::Approx(30.0).epsilon(1e-9));
    REQUIRE(loaded[0].gt_hr_bpm.has_value());
}

TEST_CASE("missing ground truth and malformed files") {
    TempDir tmp("generic_err");
    SynthSpec spec;
    spec.duration_s = 2;
    spec.seed = 3;
    DatasetRecord rec = synth_clip(spec);
    rec.gt_ppg.reset();
    rec.gt_hr_bpm.reset();
    rec.clip_id = "nogt";
    save_record_generic(rec, tmp.path);
    {
        std::ofstream m(tmp.path / "manifest.json");
        m << R"({"records":[{"id":"nogt","fs":30.0}]})";
    }
    auto loaded = load_dataset(tmp.path, Layout::kGeneric);
    REQUIRE(loaded.size() == 1);
    CHECK_FALSE(loaded[0].gt_ppg.has_value());

    // Non-monotonic time column.
    {
        std::ofstream p(tmp.path / "nogt" / "ppg.csv");
        p << "time_s,ppg\n0,0.1\n0.5,0.2\n0.25,0.3\n";
    }
    CHECK_THROWS_AS(load_dataset(tmp.path, Layout::kGeneric), ParseError);
    CHECK_THROWS_AS(load_dataset(tmp.path / "missing", Layout::kGeneric), IoError);
}

TEST_CASE("ubfc-style adapter fixture") {
    TempDir tmp("ubfc");
    SynthSpec spec;
    spec.duration_s = 2;
    spec.seed = 4;
    DatasetRecord rec = synth_clip(spec);
    rec.clip_id = "subject1";
    rec.gt_ppg.reset();
    rec.gt_hr_bpm.reset();
    save_record_generic(rec, tmp.path);
    {
        std::ofstream gt(tmp.path / "subject1" / "ground_truth.txt");
        for (int i = 0; i < 61; ++i) gt << std::sin(0.5 * i) << " ";
        gt << "\n";
        for (int i = 0; i < 61; ++i) gt << 72.0 << " ";
        gt << "\n";
        for (int i = 0; i < 61; ++i) gt << i / 30.0 << " ";
        gt << "\n";
    }
    auto loaded = load_dataset(tmp.path, Layout::kUbfcStyle);
    REQUIRE(loaded.size() == 1);
    REQUIRE(loaded[0].gt_ppg.has_value());
    CHECK(loaded[0].gt_ppg->fs == doctest::Approx(30.0).epsilon(1e-6));
    CHECK(loaded[0].gt_hr_bpm == doctest::Approx(72.0));
    CHECK(loaded[0].clip.frames == rec.clip.frames);
}

TEST_CASE("pure-style adapter fixture") {
    TempDir tmp("pure");
    SynthSpec spec;
    spec.duration_s = 2;
    spec.seed = 5;
    DatasetRecord rec = synth_clip(spec);
    rec.clip_id = "01-01";
    rec.gt_ppg.reset();
    rec.gt_hr_bpm.reset();
    save_record_generic(rec, tmp.path);
    // pure-style keeps frames directly in the record directory.
    for (const auto& e : fsys::directory_iterator(tmp.path / "01-01" / "frames")) {
        fsys::rename(e.path(), tmp.path / "01-01" / e.path().filename());
    }
    fsys::remove_all(tmp.path / "01-01" / "frames");
    {
        std::ofstream meta(tmp.path / "01-01" / "01-01.json");
        meta << R"({"/FullPackage":[)";
        for (int i = 0; i < 120; ++i) {
            if (i) meta << ",";
            meta << R"({"Value":)" << 50.0 + std::sin(0.4 * i)
                 << R"(,"Timestamp":)" << static_cast<long long>(i * 1.0e9 / 60.0) << "}";
        }
        meta << "]}";
    }
    auto loaded = load_dataset(tmp.path, Layout::kPureStyle);
    REQUIRE(loaded.size() == 1);
    REQUIRE(loaded[0].gt_ppg.has_value());
    CHECK(loaded[0].gt_ppg->fs == doctest::Approx(60.0).epsilon(1e-3));
    CHECK(loaded[0].gt_ppg->samples.size() == 120);
}

TEST_CASE("training clip sampling") {
    SynthSpec spec;
    spec.duration_s = 30;
    spec.seed = 6;
    DatasetRecord rec = synth_clip(spec);
    Rng rng(1);
    VideoClip clip = sample_training_clip(rec, rng);
    CHECK(clip.frames == 301);
    Rng r2(1);
    VideoClip clip2 = sample_training_clip(rec, r2);
    CHECK(clip.data == clip2.data);  // fixed seed, same offset

    SynthSpec exact;
    exact.duration_s = 10;
    exact.seed = 6;
    DatasetRecord re = synth_clip(exact);
    Rng r3(2);
    VideoClip c3 = sample_training_clip(re, r3);
    CHECK(c3.data == re.clip.data);  // offset forced to 0

    SynthSpec shorty;
    shorty.duration_s = 5;
    shorty.seed = 6;
    DatasetRecord rs = synth_clip(shorty);
    Rng r4(3);
    CHECK_THROWS_AS(sample_training_clip(rs, r4), ShapeError);
}

TEST_CASE("eval clip extraction") {
    SynthSpec spec;
    spec.duration_s = 95;
    spec.height = 16;
    spec.width = 16;
    spec.seed = 8;
    DatasetRecord rec = synth_clip(spec);
    auto clips = eval_clips(rec);
    REQUIRE(clips.size() == 3);
    for (const auto& c : clips) CHECK(c.frames == 901);
    // Clips tile [0, 30), [30, 60), [60, 90) exactly, sharing boundary frames.
    for (int i = 0; i < 3; ++i) {
        CHECK(std::equal(clips[i].frame(0), clips[i].frame(0) + clips[i].frame_stride(),
                         rec.clip.frame(i * 900)));
    }
    SynthSpec shorty = spec;
    shorty.duration_s = 29;
    auto none = eval_clips(synth_clip(shorty));
    CHECK(none.empty());
}
