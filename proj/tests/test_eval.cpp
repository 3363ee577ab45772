#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sspd/checkpoint.hpp"
#include "sspd/eval.hpp"

using namespace sspd;
using namespace sspd::eval;
namespace fsys = std::filesystem;

namespace {

struct TempDir {
    fsys::path path;
    explicit TempDir(const std::string& tag) {
        path = fsys::temp_directory_path() / ("sspd_eval_" + tag);
        fsys::remove_all(path);
        fsys::create_directories(path);
    }
    ~TempDir() { fsys::remove_all(path); }
};

EvalReport perfect_report() {
    EvalReport r;
    for (int i = 0; i < 4; ++i) {
        ClipRow row;
        row.clip_id = "c" + std::to_string(i);
        row.hr_gt = 60.0 + 10.0 * i;
        row.hr_pred = row.hr_gt;
        row.abs_err = 0;
        r.rows.push_back(row);
    }
    r.aggregate = recompute_aggregate(r);
    return r;
}

}  // namespace

TEST_CASE("aggregate recompute and save-time consistency check") {
    EvalReport r = perfect_report();
    CHECK(r.aggregate.mae == 0.0);
    CHECK(r.aggregate.rmse == 0.0);
    REQUIRE(r.aggregate.r.has_value());
    CHECK(*r.aggregate.r == doctest::Approx(1.0));
    TempDir tmp("report");
    save_report(r, tmp.path / "report.json");
    EvalReport back = load_report(tmp.path / "report.json");
    CHECK(back.rows.size() == r.rows.size());
    CHECK(back.aggregate.mae == r.aggregate.mae);
    // Tampered aggregates are rejected on save.
    r.aggregate.mae = 1.0;
    CHECK_THROWS_AS(save_report(r, tmp.path / "bad.json"), ShapeError);
}

TEST_CASE("failed clips are excluded but counted") {
    EvalReport r = perfect_report();
    ClipRow bad;
    bad.clip_id = "dead";
    bad.failed = true;
    bad.error = "insufficient-peaks";
    r.rows.push_back(bad);
    r.failed_clips = 1;
    signal::HrMetrics agg = recompute_aggregate(r);
    CHECK(agg.mae == 0.0);  // the failed row does not poison the aggregate
}

TEST_CASE("bland altman arithmetic and plot files round trip") {
    EvalReport r;
    ClipRow a, b;
    a.hr_gt = 60;
    a.hr_pred = 62;
    a.abs_err = 2;
    b.hr_gt = 90;
    b.hr_pred = 88;
    b.abs_err = 2;
    r.rows = {a, b};
    r.aggregate = recompute_aggregate(r);
    TempDir tmp("plots");
    emit_plots(r, tmp.path);
    CHECK(fsys::exists(tmp.path / "scatter.png"));
    CHECK(fsys::exists(tmp.path / "bland_altman.png"));
    std::ifstream ba(tmp.path / "bland_altman.csv");
    std::string line;
    double bias = 1e9, lo = 1e9, hi = 1e9;
    std::vector<std::pair<double, double>> pts;
    std::getline(ba, line);
    CHECK(line == "mean,diff");
    while (std::getline(ba, line)) {
        const auto comma = line.find(',');
        const std::string key = line.substr(0, comma);
        const double val = std::stod(line.substr(comma + 1));
        if (key == "bias") bias = val;
        else if (key == "limit_lo") lo = val;
        else if (key == "limit_hi") hi = val;
        else pts.emplace_back(std::stod(key), val);
    }
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].first == doctest::Approx(61.0));
    CHECK(pts[0].second == doctest::Approx(2.0));
    // diffs (+2, -2): bias 0, population SD 2, limits +/- 1.96 * 2.
    CHECK(bias == doctest::Approx(0.0));
    CHECK(lo == doctest::Approx(-1.96 * 2.0));
    CHECK(hi == doctest::Approx(1.96 * 2.0));

    EvalReport empty;
    CHECK_THROWS_AS(emit_plots(empty, tmp.path), ShapeError);
}

TEST_CASE("evaluation pipeline on a tiny dataset") {
    data::SynthSpec spec;
    spec.hr_bpm = 70;
    spec.duration_s = 35;
    spec.height = 32;
    spec.width = 32;
    spec.seed = 9;
    std::vector<data::DatasetRecord> ds{data::synth_clip(spec)};
    ds[0].clip_id = "r0";
    model::Network<float> net;
    net.init(model::ModelConfig{});
    EvalReport report = evaluate(net, ds);
    CHECK(report.rows.size() == 1);  // floor(35/30)
    CHECK(report.rows[0].hr_gt == doctest::Approx(70.0).epsilon(0.05));
    // Determinism: same checkpoint, same dataset, identical report.
    EvalReport report2 = evaluate(net, ds);
    CHECK(report.rows[0].hr_pred == report2.rows[0].hr_pred);

    ds[0].gt_ppg.reset();
    ds[0].gt_hr_bpm.reset();
    CHECK_THROWS_AS(evaluate(net, ds), ConfigError);
}

TEST_CASE("benchmark reports the mean of repeated runs") {
    model::Network<float> net;
    model::ModelConfig cfg;
    cfg.backbone.block_channels = {4, 8};
    cfg.backbone.input_size = 16;
    cfg.predictor.hidden = 8;
    cfg.predictor.kernel = 3;
    cfg.s3m.depth = 2;
    cfg.s3m.windows = {5, 3};
    cfg.s3m.heads = 2;
    net.init(cfg);
    CostTriple c = benchmark_inference(net, 32, 3);
    CHECK(c.wall_ms > 0.0);
    CHECK(c.params == net.count_cost(32).params_inference);
    CHECK(c.flops == net.count_cost(32).flops_inference);
}

TEST_CASE("checkpoint save/load round trip") {
    TempDir tmp("ckpt");
    model::ModelConfig cfg;
    cfg.backbone.block_channels = {4, 8};
    cfg.backbone.input_size = 16;
    cfg.predictor.hidden = 8;
    cfg.predictor.kernel = 3;
    cfg.s3m.depth = 2;
    cfg.s3m.windows = {5, 3};
    cfg.s3m.heads = 2;
    cfg.init_seed = 77;
    distill::TrainState<float> state;
    state.init(cfg, distill::AdamConfig{}, distill::MomentumSchedule{0.9, 1.0, 4});
    // Make online, target and moments all distinct.
    Rng rng(13);
    for (auto* p : state.online.params()) {
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            p->value[i] += static_cast<float>(rng.gaussian(0.0, 0.1));
        }
    }
    for (auto& m : state.opt.m_) m.setRandom();
    state.opt.step_ = 17;
    state.step = 17;
    state.momentum_clock = 2;
    ckpt::save(tmp.path / "c.bin", state, 3);

    distill::TrainState<float> back;
    ckpt::Meta meta = ckpt::load(tmp.path / "c.bin", back);
    CHECK(meta.epoch == 3);
    CHECK(back.opt.step_ == 17);
    CHECK(back.momentum_clock == 2);
    auto po = state.online.params(), pb = back.online.params();
    REQUIRE(po.size() == pb.size());
    for (size_t i = 0; i < po.size(); ++i) CHECK(po[i]->value == pb[i]->value);
    auto pt = state.target.params(), ptb = back.target.params();
    for (size_t i = 0; i < pt.size(); ++i) CHECK(pt[i]->value == ptb[i]->value);
    for (size_t i = 0; i < state.opt.m_.size(); ++i) {
        CHECK(state.opt.m_[i] == back.opt.m_[i]);
    }

    model::Network<float> inf;
    ckpt::load_inference(tmp.path / "c.bin", inf);
    auto pi = inf.params();
    for (size_t i = 0; i < pt.size(); ++i) CHECK(pt[i]->value == pi[i]->value);

    std::ofstream junk(tmp.path / "junk.bin", std::ios::binary);
    junk << "not a checkpoint";
    junk.close();
    CHECK_THROWS_AS(ckpt::load_inference(tmp.path / "junk.bin", inf), ParseError);
}
