// Command-line front end: synth / train / eval / infer / bench / plot.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"

#include "sspd/augment.hpp"
#include "sspd/checkpoint.hpp"
#include "sspd/config.hpp"
#include "sspd/data.hpp"
#include "sspd/distill.hpp"
#include "sspd/eval.hpp"

namespace fs = std::filesystem;
using namespace sspd;

namespace {

model::ModelConfig model_config_from(const config::RunConfig& cfg) {
    model::ModelConfig mc;
    mc.backbone.input_size = cfg.input;
    mc.s3m.depth = cfg.s3m_depth;
    mc.s3m.windows = cfg.windows;
    mc.s3m.heads = cfg.heads;
    mc.s3m.half_pool_tokenizer = cfg.half_pool_tokenizer;
    mc.init_seed = cfg.seed;
    return mc;
}

augment::AugmentConfig augment_config_from(const config::RunConfig& cfg) {
    augment::AugmentConfig ac;
    ac.mask_ratio_p = cfg.mask_p;
    ac.crop_scale_min = cfg.crop_scale_min;
    ac.crop_scale_max = cfg.crop_scale_max;
    ac.flip_prob = cfg.flip_prob;
    ac.noise_std = cfg.noise_std;
    ac.seed = cfg.seed;
    return ac;
}

int cmd_synth(int n, const std::string& hr_range, double fs, double dur, double noise,
              long long seed_arg, const std::string& out, bool force) {
    const uint64_t seed = config::resolve_seed(seed_arg);
    double hr_lo = 48, hr_hi = 120;
    const size_t colon = hr_range.find(':');
    if (colon == std::string::npos) {
        hr_lo = hr_hi = std::stod(hr_range);
    } else {
        hr_lo = std::stod(hr_range.substr(0, colon));
        hr_hi = std::stod(hr_range.substr(colon + 1));
    }
    const fs::path root(out);
    if (fs::exists(root) && !fs::is_empty(root) && !force) {
        throw ConfigError("output directory " + root.string() +
                          " is not empty; pass --force to overwrite");
    }
    fs::create_directories(root);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        Rng rec_rng = rng.fork(static_cast<uint64_t>(i));
        data::SynthSpec spec;
        spec.hr_bpm = hr_lo + (hr_hi - hr_lo) * rec_rng.uniform();
        spec.fs = fs;
        spec.duration_s = dur;
        spec.noise_std = noise;
        spec.seed = rec_rng.fork(1).next_u64();
        data::DatasetRecord rec = data::synth_clip(spec);
        char id[32];
        std::snprintf(id, sizeof(id), "rec%03d", i);
        rec.clip_id = id;
        rec.subject_id = id;
        data::save_record_generic(rec, root);
        std::cout << id << " hr=" << spec.hr_bpm << " bpm\n";
    }
    data::write_manifest(root);
    std::cout << "wrote " << n << " records to " << root.string() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_root,
              const std::string& out, long long seed_arg, const std::string& resume,
              int override_epochs) {
    config::RunConfig cfg =
        config_path.empty() ? config::RunConfig{} : config::load_config(config_path);
    if (seed_arg >= 0 || std::getenv("SSPD_SEED")) cfg.seed = config::resolve_seed(seed_arg);
    if (override_epochs > 0) cfg.epochs = override_epochs;
    cfg.validate();

    auto dataset = data::load_dataset(data_root, data::Layout::kGeneric);
    if (dataset.empty()) throw IoError("no records under " + data_root);
    const fs::path out_dir(out);
    fs::create_directories(out_dir);
    {
        std::ofstream dump(out_dir / "config.effective.toml");
        dump << config::dump_config(cfg);
    }

    distill::TrainState<float> state;
    distill::AdamConfig adam;
    adam.lr = cfg.lr;
    distill::MomentumSchedule mom;
    mom.rho_start = cfg.rho_start;
    mom.rho_end = cfg.rho_end;
    mom.total_steps = cfg.epochs;
    int start_epoch = 0;
    if (!resume.empty()) {
        state.opt.cfg = adam;
        ckpt::Meta meta = ckpt::load(resume, state);
        start_epoch = meta.epoch;
        state.momentum.total_steps = cfg.epochs;
    } else {
        state.init(model_config_from(cfg), adam, mom);
    }

    const augment::AugmentConfig aug = augment_config_from(cfg);
    const loss::LossWeights weights{cfg.alpha, cfg.beta, cfg.epsilon};
    Rng run_rng(cfg.seed);

    std::ofstream log(out_dir / "train_log.csv", resume.empty() ? std::ios::out : std::ios::app);
    if (resume.empty()) log << "epoch,step,tspd,rpd,sd,snr,total,rho\n";
    log.precision(10);

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        state.momentum_clock = epoch;
        Rng epoch_rng = run_rng.fork(static_cast<uint64_t>(epoch) + 17);
        std::vector<int> order(dataset.size());
        std::iota(order.begin(), order.end(), 0);
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[epoch_rng.uniform_int(0, static_cast<int>(i) - 1)]);
        }
        for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.batch)) {
            std::vector<VideoClip> batch;
            for (size_t k = b; k < std::min(order.size(), b + static_cast<size_t>(cfg.batch));
                 ++k) {
                Rng clip_rng = epoch_rng.fork(1000 + static_cast<uint64_t>(order[k]));
                batch.push_back(
                    data::sample_training_clip(dataset[order[k]], clip_rng, cfg.clip_train_s));
            }
            Rng step_rng = epoch_rng.fork(2000 + b);
            distill::StepStats st = distill::train_step(state, batch, aug, weights, step_rng);
            log << epoch << "," << state.step << "," << st.losses.tspd << "," << st.losses.rpd
                << "," << st.losses.sd << "," << st.losses.snr << "," << st.losses.total << ","
                << st.rho << "\n";
            log.flush();
            std::cout << "epoch " << epoch << " step " << state.step
                      << " total " << st.losses.total << " rho " << st.rho << std::endl;
        }
        char name[48];
        std::snprintf(name, sizeof(name), "ckpt_epoch%03d.bin", epoch + 1);
        ckpt::save(out_dir / name, state, epoch + 1);
    }
    std::cout << "training done; checkpoints in " << out_dir.string() << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_root, const std::string& out) {
    model::Network<float> net;
    ckpt::load_inference(ckpt_path, net);
    auto dataset = data::load_dataset(data_root, data::Layout::kGeneric);
    if (dataset.empty()) throw IoError("no records under " + data_root);
    eval::EvalReport report = eval::evaluate(net, dataset);
    report.cost = eval::benchmark_inference(net, 300, 3);
    fs::create_directories(out);
    eval::save_report(report, fs::path(out) / "report.json");
    std::cout << "clips " << report.rows.size() << " (failed " << report.failed_clips << ")"
              << " mae " << report.aggregate.mae << " rmse " << report.aggregate.rmse << " sd "
              << report.aggregate.sd;
    if (report.aggregate.r) std::cout << " r " << *report.aggregate.r;
    std::cout << "\nreport: " << (fs::path(out) / "report.json").string() << "\n";
    return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& clip_dir, const std::string& out) {
    model::Network<float> net;
    ckpt::load_inference(ckpt_path, net);
    // Treat the directory as one generic-layout record.
    const fs::path dir(clip_dir);
    auto parent = dir.parent_path().empty() ? fs::path(".") : dir.parent_path();
    data::DatasetRecord rec;
    bool found = false;
    for (auto& r : data::load_dataset(parent, data::Layout::kGeneric)) {
        if (r.clip_id == dir.filename().string()) {
            rec = std::move(r);
            found = true;
        }
    }
    if (!found) throw IoError("no generic-layout record at " + dir.string());
    signal::RealSignal rppg = eval::infer_clip(net, rec.clip);
    std::ofstream csv(out);
    if (!csv) throw IoError("cannot write " + out);
    csv.precision(17);
    csv << "time_s,rppg\n";
    for (Eigen::Index i = 0; i < rppg.samples.size(); ++i) {
        csv << (static_cast<double>(i) / rppg.fs) << "," << rppg.samples[i] << "\n";
    }
    std::cout << "wrote " << out << " (" << rppg.samples.size() << " samples)\n";
    return 0;
}

int cmd_bench(const std::string& ckpt_path, int frames, int repeats, const std::string& out) {
    model::Network<float> net;
    if (!ckpt_path.empty()) {
        ckpt::load_inference(ckpt_path, net);
    } else {
        net.init(model_config_from(config::RunConfig{}));
    }
    eval::CostTriple cost = eval::benchmark_inference(net, frames, repeats);
    std::cout << "params " << cost.params << " flops " << cost.flops << " wall_ms "
              << cost.wall_ms << "\n";
    if (!out.empty()) {
        std::ofstream f(out);
        f << "params,flops,wall_ms\n"
          << cost.params << "," << cost.flops << "," << cost.wall_ms << "\n";
    }
    return 0;
}

int cmd_plot(const std::string& report_path, const std::string& out) {
    eval::EvalReport report = eval::load_report(report_path);
    eval::emit_plots(report, out);
    std::cout << "plots written to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-distilled rPPG heart-rate estimation pipeline"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    int s_n = 20;
    std::string s_hr = "48:120", s_out = "data/synth";
    double s_fs = 30, s_dur = 90, s_noise = 0.005;
    long long s_seed = -1;
    bool s_force = false;
    synth->add_option("--n", s_n, "number of records");
    synth->add_option("--hr", s_hr, "HR range lo:hi in bpm");
    synth->add_option("--fs", s_fs, "frame rate (Hz)");
    synth->add_option("--dur", s_dur, "record duration (s)");
    synth->add_option("--noise", s_noise, "pixel noise std");
    synth->add_option("--seed", s_seed, "rng seed (fallback: SSPD_SEED)");
    synth->add_option("--out", s_out, "output directory");
    synth->add_flag("--force", s_force, "allow writing into a non-empty directory");

    auto* train = app.add_subcommand("train", "unsupervised training");
    std::string t_config, t_data, t_out = "runs/train", t_resume;
    long long t_seed = -1;
    int t_epochs = -1;
    train->add_option("--config", t_config, "key = value config file");
    train->add_option("--data", t_data, "dataset root (generic layout)")->required();
    train->add_option("--out", t_out, "run directory");
    train->add_option("--seed", t_seed, "rng seed (fallback: SSPD_SEED)");
    train->add_option("--resume", t_resume, "checkpoint to resume from");
    train->add_option("--epochs", t_epochs, "override epoch count");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string e_ckpt, e_data, e_out = "runs/eval";
    eval_cmd->add_option("--ckpt", e_ckpt, "checkpoint")->required();
    eval_cmd->add_option("--data", e_data, "dataset root")->required();
    eval_cmd->add_option("--out", e_out, "output directory");

    auto* infer = app.add_subcommand("infer", "predict rPPG for one clip");
    std::string i_ckpt, i_clip, i_out = "rppg.csv";
    infer->add_option("--ckpt", i_ckpt, "checkpoint")->required();
    infer->add_option("--clip", i_clip, "generic-layout record directory")->required();
    infer->add_option("--out", i_out, "output csv");

    auto* bench = app.add_subcommand("bench", "inference cost benchmark");
    std::string b_ckpt, b_out;
    int b_frames = 300, b_repeats = 10;
    bench->add_option("--ckpt", b_ckpt, "checkpoint (optional; fresh init otherwise)");
    bench->add_option("--frames", b_frames, "clip length in frames");
    bench->add_option("--repeats", b_repeats, "number of timed runs");
    bench->add_option("--out", b_out, "optional csv output");

    auto* plot = app.add_subcommand("plot", "emit plot data from a report");
    std::string p_report, p_out = "runs/plots";
    plot->add_option("--report", p_report, "report.json path")->required();
    plot->add_option("--out", p_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            return cmd_synth(s_n, s_hr, s_fs, s_dur, s_noise, s_seed, s_out, s_force);
        }
        if (train->parsed()) return cmd_train(t_config, t_data, t_out, t_seed, t_resume, t_epochs);
        if (eval_cmd->parsed()) return cmd_eval(e_ckpt, e_data, e_out);
        if (infer->parsed()) return cmd_infer(i_ckpt, i_clip, i_out);
        if (bench->parsed()) return cmd_bench(b_ckpt, b_frames, b_repeats, b_out);
        if (plot->parsed()) return cmd_plot(p_report, p_out);
    } catch (const SspdError& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: unexpected: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
