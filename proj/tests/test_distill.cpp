#include "doctest.h"

#include <cmath>

#include "sspd/data.hpp"
#include "sspd/distill.hpp"

using namespace sspd;
using namespace sspd::distill;

namespace {

model::ModelConfig tiny_config() {
    model::ModelConfig cfg;
    cfg.backbone.block_channels = {4, 8};
    cfg.backbone.input_size = 16;
    cfg.predictor.hidden = 8;
    cfg.predictor.kernel = 3;
    cfg.s3m.depth = 2;
    cfg.s3m.windows = {5, 3};
    cfg.s3m.heads = 2;
    cfg.init_seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("momentum schedule endpoints and monotonicity") {
    MomentumSchedule m{0.9, 1.0, 20};
    CHECK(m.at(0) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(m.at(20) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.at(10) == doctest::Approx(0.95).epsilon(1e-12));
    for (int t = 1; t <= 20; ++t) CHECK(m.at(t) > m.at(t - 1));
    CHECK(m.at(50) == 1.0);  // clamped past the horizon
}

TEST_CASE("online and target start identical and ema follows the recurrence") {
    TrainState<float> state;
    state.init(tiny_config(), AdamConfig{}, MomentumSchedule{0.9, 1.0, 5});
    auto po = state.online.params();
    auto pt = state.target.params();
    REQUIRE(po.size() == pt.size());
    for (size_t i = 0; i < po.size(); ++i) {
        CHECK(po[i]->value == pt[i]->value);  // bit equality at init
    }
    // Drive the online weights through 5 arbitrary updates and track the
    // target recurrence independently.
    Rng rng(3);
    std::vector<nn::Vx<float>> expected;
    for (auto* p : pt) expected.push_back(p->value);
    for (int step = 0; step < 5; ++step) {
        for (auto* p : po) {
            for (Eigen::Index i = 0; i < p->value.size(); ++i) {
                p->value[i] += static_cast<float>(rng.gaussian(0.0, 0.01));
            }
        }
        const double rho = 0.9 + 0.01 * step;
        ema_update(po, pt, rho);
        for (size_t i = 0; i < po.size(); ++i) {
            expected[i] = static_cast<float>(rho) * expected[i] +
                          (1.0f - static_cast<float>(rho)) * po[i]->value;
        }
    }
    for (size_t i = 0; i < pt.size(); ++i) {
        CHECK(pt[i]->value == expected[i]);  // bit-exact recurrence
    }
    // rho = 1 freezes the target.
    auto frozen = pt[0]->value;
    po[0]->value.array() += 1.0f;
    ema_update(po, pt, 1.0);
    CHECK(pt[0]->value == frozen);
}

TEST_CASE("adam minimizes a quadratic") {
    nn::Param<float> p;
    p.init_zero("x", 4);
    p.value << 5.0f, -3.0f, 2.0f, 8.0f;
    std::vector<nn::Param<float>*> ps{&p};
    Adam<float> opt;
    opt.cfg.lr = 0.1;
    opt.attach(ps);
    for (int i = 0; i < 500; ++i) {
        p.grad = 2.0f * p.value;  // d/dx sum(x^2)
        opt.step(ps);
    }
    CHECK(p.value.cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("train step runs, is deterministic, and moves both networks") {
    data::SynthSpec spec;
    spec.hr_bpm = 72;
    spec.duration_s = 2.0;
    spec.fs = 10;
    spec.height = 32;
    spec.width = 32;
    spec.seed = 5;
    data::DatasetRecord rec = data::synth_clip(spec);

    auto run = [&](TrainState<float>& state) {
        augment::AugmentConfig aug;
        loss::LossWeights weights;
        Rng rng(9);
        std::vector<VideoClip> batch{rec.clip, rec.clip};
        return train_step(state, batch, aug, weights, rng);
    };

    model::ModelConfig cfg;  // full-size net, tiny clip (20 frames)
    cfg.s3m.windows = {5, 3, 3};
    TrainState<float> a, b;
    a.init(cfg, AdamConfig{}, MomentumSchedule{0.9, 1.0, 10});
    b.init(cfg, AdamConfig{}, MomentumSchedule{0.9, 1.0, 10});
    auto before = a.online.params()[0]->value;
    auto t_before = a.target.params()[0]->value;
    StepStats sa = run(a);
    StepStats sb = run(b);
    CHECK(std::isfinite(sa.losses.total));
    CHECK(sa.losses.total == sb.losses.total);  // bit-exact replay
    CHECK(a.online.params()[0]->value == b.online.params()[0]->value);
    CHECK(a.online.params()[0]->value != before);
    CHECK(a.target.params()[0]->value != t_before);
    CHECK(sa.rho == doctest::Approx(0.9));
    CHECK(a.step == 1);

    augment::AugmentConfig aug;
    loss::LossWeights weights;
    Rng rng(1);
    std::vector<VideoClip> empty;
    CHECK_THROWS_AS(train_step(a, empty, aug, weights, rng), ShapeError);
}
