// ucf: record simulator sequences, train the tracker, run the experiment
// protocol, and render reports.

#include <cstdio>
#include <exception>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "ucf/config.hpp"
#include "ucf/dataset.hpp"
#include "ucf/protocol.hpp"

namespace {

ucf::Config load_or_default(const std::string& path) {
    return path.empty() ? ucf::Config{} : ucf::load_config(path);
}

ucf::ExperimentSpec spec_from(const ucf::Config& cfg) {
    ucf::ExperimentSpec spec;
    spec.trials = static_cast<std::size_t>(cfg.integer("protocol.trials", 3));
    spec.seed = ucf::effective_seed(cfg);
    spec.setup.camera = ucf::camera_from(cfg);
    spec.setup.linear = ucf::linear_controller_from(cfg);
    spec.setup.angular = ucf::angular_controller_from(cfg);
    spec.setup.follow_distance = cfg.number("control.follow_distance", ucf::kFollowDistance);
    spec.setup.reverse_limit = cfg.number("control.reverse_speed_limit", ucf::kReverseSpeedLimit);
    spec.setup.sigma_rgb = cfg.number("noise.sigma_rgb", 0.01);
    spec.setup.sigma_depth = cfg.number("noise.sigma_depth", 0.02);
    spec.setup.timeout_seconds = cfg.number("protocol.timeout_seconds", ucf::kTrialTimeout);
    spec.setup.init_retry_frames =
        static_cast<std::size_t>(cfg.integer("protocol.init_retry_frames", ucf::kInitRetryFrames));
    spec.setup.verify_threshold = cfg.number("perception.threshold", ucf::kVerifyThreshold);
    spec.setup.face_sigma = cfg.number("perception.noise_sigma", ucf::kFaceNoiseSigma);
    spec.setup.face_range = cfg.number("perception.face_range", ucf::kFaceRange);
    spec.setup.box_jitter = cfg.number("perception.box_jitter", ucf::kPersonJitter);
    spec.setup.iou_threshold = cfg.number("metrics.iou_threshold", ucf::kFollowIouThreshold);
    spec.setup.grace_frames =
        static_cast<std::size_t>(cfg.integer("metrics.grace_frames", ucf::kFollowGraceFrames));
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uniform-crowd person-following experiments"};
    app.require_subcommand(1);

    std::string config_path, scenario = "none", out_dir, report_path, checkpoint;
    std::uint64_t seed = 1;
    std::size_t frames = ucf::kRecordFrames;
    bool corpus = false;

    auto* record = app.add_subcommand("record", "record a simulator sequence to disk");
    record->add_option("--scenario", scenario, "none|one_cross|two_cross|two_parallel");
    record->add_option("--seed", seed, "noise / corpus seed");
    record->add_option("--out", out_dir, "output directory")->required();
    record->add_option("--frames", frames, "frames per sequence");
    record->add_option("--config", config_path, "config file");
    record->add_flag("--corpus", corpus, "emit the default 45-sequence training corpus");

    auto* train = app.add_subcommand("train", "train the tracker on a recorded corpus");
    train->add_option("--config", config_path, "config file");
    std::string corpus_dir, metrics_csv = "train_metrics.csv";
    train->add_option("--corpus", corpus_dir, "sequence directory")->required();
    train->add_option("--out", checkpoint, "checkpoint path")->required();
    train->add_option("--metrics", metrics_csv, "per-epoch loss CSV");

    auto* run = app.add_subcommand("run", "run the experiment protocol");
    run->add_option("--config", config_path, "config file");
    run->add_option("--checkpoint", checkpoint, "trained tracker checkpoint");
    run->add_option("--out", report_path, "binary report path")->required();
    std::string trackers = "baseline,dtrd";
    run->add_option("--trackers", trackers, "comma list from {baseline,dtrd}");

    auto* report = app.add_subcommand("report", "render a binary report to CSV tables");
    report->add_option("--in", report_path, "binary report path")->required();
    report->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (record->parsed()) {
            const ucf::Config cfg = load_or_default(config_path);
            const ucf::CameraModel cam = ucf::camera_from(cfg);
            if (record->count("--frames") == 0)
                frames = static_cast<std::size_t>(
                    cfg.integer("record.frames", static_cast<long long>(ucf::kRecordFrames)));
            const double s_rgb = cfg.number("noise.sigma_rgb", 0.01);
            const double s_depth = cfg.number("noise.sigma_depth", 0.02);
            if (corpus) {
                const auto dirs = ucf::generate_corpus(out_dir, seed, cam,
                                                       ucf::kCorpusSequences, frames,
                                                       s_rgb, s_depth);
                std::printf("recorded %zu sequences under %s\n", dirs.size(), out_dir.c_str());
            } else {
                const std::size_t n = ucf::record_sequence(
                    out_dir, ucf::parse_scenario(scenario), ucf::subject_a(), cam, seed, frames,
                    s_rgb, s_depth);
                std::printf("recorded %zu frames to %s\n", n, out_dir.c_str());
            }
        } else if (train->parsed()) {
            const ucf::Config cfg = load_or_default(config_path);
            const ucf::TrainReport r =
                ucf::train_command(corpus_dir, cfg, checkpoint, metrics_csv);
            std::printf("trained on %zu sequences (%zu pairs), eval on %zu\n",
                        r.train_sequences, r.pairs, r.eval_sequences);
            std::printf("epoch-1 loss %.4f, final loss %.4f\n", r.epoch_loss.front(),
                        r.epoch_loss.back());
            std::printf("held-out mean IOU %.4f -> %.4f\n", r.heldout_iou_before,
                        r.heldout_iou_after);
        } else if (run->parsed()) {
            const ucf::Config cfg = load_or_default(config_path);
            ucf::ExperimentSpec spec = spec_from(cfg);
            spec.trackers.clear();
            for (std::size_t at = 0; at < trackers.size();) {
                const auto comma = trackers.find(',', at);
                const auto end = comma == std::string::npos ? trackers.size() : comma;
                if (end > at) spec.trackers.push_back(trackers.substr(at, end - at));
                at = end + 1;
            }
            std::shared_ptr<ucf::DtrdModel> model;
            for (const auto& t : spec.trackers)
                if (t == "dtrd") {
                    if (checkpoint.empty())
                        throw ucf::ContractError("run: dtrd listed but no --checkpoint given");
                    model = ucf::load_model(cfg, checkpoint);
                }
            const ucf::MetricsReport r = ucf::run_protocol(spec, model);
            ucf::save_report(report_path, r, cfg.number("metrics.fps_floor", ucf::kFpsFloor));
            std::printf("wrote %zu trial rows to %s\n", r.rows.size(), report_path.c_str());
        } else if (report->parsed()) {
            const ucf::MetricsReport r = ucf::load_report(report_path);
            ucf::write_report_csvs(r, out_dir);
            std::printf("wrote summary.csv, de.csv, fs.csv, fps.csv under %s\n",
                        out_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ucf: %s\n", e.what());
        return 1;
    }
    return 0;
}
