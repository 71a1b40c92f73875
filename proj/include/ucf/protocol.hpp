#pragma once

// The experiment protocol: nested subject x tracker x scenario x trial loops,
// each trial running the full perceive-track-control-step cycle in the
// simulator, plus the report format and the training entry point.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ucf/baseline.hpp"
#include "ucf/common.hpp"
#include "ucf/config.hpp"
#include "ucf/control.hpp"
#include "ucf/dataset.hpp"
#include "ucf/dtrd.hpp"
#include "ucf/metrics.hpp"
#include "ucf/perception.hpp"
#include "ucf/sim.hpp"

namespace ucf {

inline constexpr double kTrialTimeout = 120.0;       // s of simulated time
inline constexpr std::size_t kInitRetryFrames = 100; // frames to find the target

// ---------------------------------------------------------------------------
// configuration adapters

inline TrackerConfig tracker_config_from(const Config& cfg) {
    TrackerConfig tc;
    tc.template_size = static_cast<std::size_t>(cfg.integer("model.template_size", 32));
    tc.search_size = static_cast<std::size_t>(cfg.integer("model.search_size", 64));
    tc.stride = static_cast<std::size_t>(cfg.integer("model.stride", 8));
    tc.channels = static_cast<std::size_t>(cfg.integer("model.channels", 64));
    tc.model_dim = static_cast<std::size_t>(cfg.integer("model.dim", 128));
    tc.heads = static_cast<std::size_t>(cfg.integer("model.heads", 4));
    tc.ffn_dim = static_cast<std::size_t>(cfg.integer("model.ffn_dim", 256));
    tc.encoder_blocks = static_cast<std::size_t>(cfg.integer("model.encoder_blocks", 6));
    tc.decoder_blocks = static_cast<std::size_t>(cfg.integer("model.decoder_blocks", 6));
    tc.search_area_factor = cfg.number("model.search_area_factor", 4.0);
    tc.lambda_iou = cfg.number("model.lambda_iou", 2.0);
    tc.lambda_l1 = cfg.number("model.lambda_l1", 5.0);
    tc.use_depth = cfg.flag("model.use_depth", true);
    tc.validate();
    return tc;
}

inline TrainSettings train_settings_from(const Config& cfg) {
    TrainSettings ts;
    ts.epochs = static_cast<std::size_t>(cfg.integer("train.epochs", 10));
    ts.lr_model = cfg.number("train.lr_model", 1e-4);
    ts.lr_backbone = cfg.number("train.lr_backbone", 1e-5);
    ts.weight_decay = cfg.number("train.weight_decay", 1e-4);
    ts.center_jitter = cfg.number("train.center_jitter", 0.12);
    ts.scale_jitter = cfg.number("train.scale_jitter", 0.25);
    ts.seed = static_cast<std::uint64_t>(cfg.integer("train.seed", 1));
    return ts;
}

inline PIController linear_controller_from(const Config& cfg) {
    PIController c = default_linear_controller();
    c.kp = cfg.number("control.kp_linear", c.kp);
    c.ki = cfg.number("control.ki_linear", c.ki);
    c.output_limit = cfg.number("control.output_limit_linear", c.output_limit);
    c.integral_limit = cfg.number("control.integral_limit_linear", c.integral_limit);
    return c;
}

inline PIController angular_controller_from(const Config& cfg) {
    PIController c = default_angular_controller();
    c.kp = cfg.number("control.kp_angular", c.kp);
    c.ki = cfg.number("control.ki_angular", c.ki);
    c.output_limit = cfg.number("control.output_limit_angular", c.output_limit);
    c.integral_limit = cfg.number("control.integral_limit_angular", c.integral_limit);
    return c;
}

inline CameraModel camera_from(const Config& cfg) {
    CameraModel cam;
    cam.image_w = static_cast<std::size_t>(cfg.integer("camera.width", 96));
    cam.image_h = static_cast<std::size_t>(cfg.integer("camera.height", 96));
    cam.hfov = cfg.number("camera.hfov_deg", 90.0) * 3.14159265358979323846 / 180.0;
    cam.height = cfg.number("camera.height_m", 1.0);
    validate_camera(cam);
    return cam;
}

// ---------------------------------------------------------------------------
// one tracker behind one interface

class AnyTracker {
public:
    explicit AnyTracker(BaselineConfig cfg) : impl_(BaselineTracker(cfg)) {}
    explicit AnyTracker(std::shared_ptr<DtrdModel> model)
        : impl_(DtrdTracker(std::move(model))) {}

    void init(const RgbdFrame& frame, const BoundingBox& box) {
        std::visit([&](auto& t) { t.init(frame, box); }, impl_);
    }
    std::pair<BoundingBox, double> step(const RgbdFrame& frame) {
        return std::visit([&](auto& t) { return t.step(frame); }, impl_);
    }

private:
    std::variant<BaselineTracker, DtrdTracker> impl_;
};

// ---------------------------------------------------------------------------
// trials

struct TrialSetup {
    CameraModel camera;
    PIController linear = default_linear_controller();
    PIController angular = default_angular_controller();
    double follow_distance = kFollowDistance;
    double reverse_limit = kReverseSpeedLimit;
    double sigma_rgb = 0.01;
    double sigma_depth = 0.02;
    double timeout_seconds = kTrialTimeout;
    std::size_t init_retry_frames = kInitRetryFrames;
    double verify_threshold = kVerifyThreshold;
    double face_sigma = kFaceNoiseSigma;
    double face_range = kFaceRange;
    double box_jitter = kPersonJitter;
    double iou_threshold = kFollowIouThreshold;
    std::size_t grace_frames = kFollowGraceFrames;
    std::uint64_t latent_seed = 0;
};

struct TrialOutcome {
    TrialLog log;
    bool init_ok = false;
    double de = 0.0, fs = 0.0, fps = 0.0;
    std::size_t frames = 0;
};

inline TrialOutcome run_trial(ScenarioKind kind, const SubjectPreset& subject,
                              AnyTracker tracker, std::uint64_t trial_seed,
                              const TrialSetup& setup) {
    WorldState world = make_world(kind, subject);
    const std::size_t target = world.target_index();
    TrialOutcome out;
    out.log.target_path_length = path_length(world.agents[target].path);

    const auto latents =
        identity_latents(world.agents.size(), setup.latent_seed);
    const IdentityGallery gallery{
        latents[static_cast<std::size_t>(world.agents[target].latent_id)],
        setup.verify_threshold};
    std::mt19937_64 noise_rng = make_rng(trial_seed, "frame-noise");
    std::mt19937_64 percept_rng = make_rng(trial_seed, "perception");

    auto snapshot = [&](bool has_box, const BoundingBox& box, double est,
                        double seconds) {
        FrameRecord rec;
        rec.has_box = has_box;
        if (has_box) rec.box = box;
        rec.est_depth = est;
        const Agent& t = world.agents[target];
        rec.true_distance = std::hypot(t.pos.x - world.robot.x, t.pos.y - world.robot.y);
        rec.gt_box = ground_truth_bbox(world, setup.camera, target);
        rec.target_progress = t.progress;
        rec.tracker_seconds = seconds;
        out.log.frames.push_back(std::move(rec));
    };

    // identification phase: the robot stands still until the target verifies
    for (std::size_t f = 0; f < setup.init_retry_frames && !out.init_ok; ++f) {
        const RgbdFrame frame =
            render_rgbd(world, setup.camera, &noise_rng, setup.sigma_rgb, setup.sigma_depth);
        const auto box =
            initialize_target(world, setup.camera, gallery, latents, &percept_rng,
                              setup.face_sigma, setup.face_range, setup.box_jitter);
        snapshot(false, BoundingBox(0.0, 0.0, 1.0, 1.0), 0.0, 0.0);
        if (box) {
            tracker.init(frame, *box);
            out.init_ok = true;
        }
        step_world(world);
    }
    if (!out.init_ok) {  // trial failed before it began
        out.fs = 0.0;
        out.frames = out.log.frames.size();
        return out;
    }

    PIController lin = setup.linear, ang = setup.angular;
    while (!world.agents[target].walking_done() && world.time < setup.timeout_seconds) {
        const RgbdFrame frame =
            render_rgbd(world, setup.camera, &noise_rng, setup.sigma_rgb, setup.sigma_depth);

        const auto t0 = std::chrono::steady_clock::now();
        const auto [box, conf] = tracker.step(frame);
        const double est = box_median_depth(frame, box);
        const auto t1 = std::chrono::steady_clock::now();
        const double seconds = std::chrono::duration<double>(t1 - t0).count();

        snapshot(true, box, est, seconds);

        const auto [v, omega] = follow_control(box, est, lin, ang, kSimDt,
                                               setup.follow_distance, setup.reverse_limit);
        world.robot.v = v;
        world.robot.omega = omega;
        step_world(world);
    }

    out.frames = out.log.frames.size();
    out.de = compute_de(out.log);
    out.fs = compute_fs(out.log, setup.iou_threshold, setup.grace_frames);
    out.fps = compute_fps(out.log);
    return out;
}

// ---------------------------------------------------------------------------
// the protocol

struct ExperimentSpec {
    std::vector<std::string> subject_names{"A", "B"};
    std::vector<SubjectPreset> subjects{subject_a(), subject_b()};
    std::vector<std::string> trackers{"baseline", "dtrd"};
    std::vector<ScenarioKind> scenarios{ScenarioKind::none, ScenarioKind::one_cross,
                                        ScenarioKind::two_cross, ScenarioKind::two_parallel};
    std::size_t trials = 3;
    std::uint64_t seed = 1;
    TrialSetup setup;
};

inline void validate_spec(const ExperimentSpec& spec) {
    if (spec.trials < 1) throw ContractError("experiment spec: trials must be >= 1");
    if (spec.trackers.empty()) throw ContractError("experiment spec: no trackers listed");
    if (spec.subjects.empty() || spec.subjects.size() != spec.subject_names.size())
        throw ContractError("experiment spec: subjects and names must align");
    if (spec.scenarios.empty()) throw ContractError("experiment spec: no scenarios listed");
    for (const std::string& t : spec.trackers)
        if (t != "baseline" && t != "dtrd")
            throw ContractError("experiment spec: unknown tracker " + t);
}

struct TrialRow {
    std::string subject, tracker, scenario;
    std::uint32_t trial = 0;
    double de = 0.0, fs = 0.0, fps = 0.0;
    std::uint64_t frames = 0;
    bool init_ok = false;
};

struct AggregateRow {
    std::string tracker, scenario;
    double de_mean = 0.0, de_std = 0.0, fs_mean = 0.0, fs_std = 0.0;
};

struct MetricsReport {
    std::vector<TrialRow> rows;
    std::vector<AggregateRow> aggregates;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(std::max(var, 0.0))};
}

}  // namespace detail

// Runs every (subject, tracker, scenario, trial) cell in spec order. A model
// is required whenever "dtrd" is listed.
inline MetricsReport run_protocol(const ExperimentSpec& spec,
                                  std::shared_ptr<DtrdModel> model = nullptr) {
    validate_spec(spec);
    for (const std::string& t : spec.trackers)
        if (t == "dtrd" && model == nullptr)
            throw ContractError("protocol: dtrd tracker listed but no trained model given");

    TrialSetup setup = spec.setup;
    setup.latent_seed = mix_seed(spec.seed, "latents");

    MetricsReport report;
    for (std::size_t si = 0; si < spec.subjects.size(); ++si)
        for (std::size_t ti = 0; ti < spec.trackers.size(); ++ti)
            for (std::size_t sc = 0; sc < spec.scenarios.size(); ++sc)
                for (std::size_t trial = 0; trial < spec.trials; ++trial) {
                    const std::uint64_t trial_seed =
                        mix_seed(spec.seed, "trial", si, ti, sc * 1000 + trial);
                    AnyTracker tracker =
                        spec.trackers[ti] == "dtrd"
                            ? AnyTracker(model)
                            : AnyTracker(BaselineConfig{});
                    const TrialOutcome outcome = run_trial(
                        spec.scenarios[sc], spec.subjects[si], std::move(tracker),
                        trial_seed, setup);
                    TrialRow row;
                    row.subject = spec.subject_names[si];
                    row.tracker = spec.trackers[ti];
                    row.scenario = scenario_name(spec.scenarios[sc]);
                    row.trial = static_cast<std::uint32_t>(trial);
                    row.de = outcome.de;
                    row.fs = outcome.fs;
                    row.fps = outcome.fps;
                    row.frames = outcome.frames;
                    row.init_ok = outcome.init_ok;
                    report.rows.push_back(std::move(row));
                }

    for (const std::string& tracker : spec.trackers)
        for (const ScenarioKind sc : spec.scenarios) {
            const std::string scen = scenario_name(sc);
            std::vector<double> des, fss;
            for (const TrialRow& row : report.rows)
                if (row.tracker == tracker && row.scenario == scen) {
                    des.push_back(row.de);
                    fss.push_back(row.fs);
                }
            AggregateRow agg;
            agg.tracker = tracker;
            agg.scenario = scen;
            std::tie(agg.de_mean, agg.de_std) = detail::mean_std(des);
            std::tie(agg.fs_mean, agg.fs_std) = detail::mean_std(fss);
            report.aggregates.push_back(std::move(agg));
        }
    return report;
}

// ---------------------------------------------------------------------------
// report files. The binary report holds only deterministic quantities; the
// wall-clock timing numbers go to a CSV sidecar so that identical runs always
// produce identical report bytes.

inline constexpr std::uint32_t kReportVersion = 1;

namespace detail {

inline void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    for (char c : s) out.push_back(static_cast<std::uint8_t>(c));
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_report(const MetricsReport& report) {
    std::vector<std::uint8_t> out;
    for (char c : {'U', 'C', 'F', 'R'}) out.push_back(static_cast<std::uint8_t>(c));
    put_u32(out, kReportVersion);
    put_u32(out, static_cast<std::uint32_t>(report.rows.size()));
    for (const TrialRow& r : report.rows) {
        detail::put_str(out, r.subject);
        detail::put_str(out, r.tracker);
        detail::put_str(out, r.scenario);
        put_u32(out, r.trial);
        put_f64(out, r.de);
        put_f64(out, r.fs);
        put_u64(out, r.frames);
        out.push_back(r.init_ok ? 1 : 0);
    }
    put_u32(out, static_cast<std::uint32_t>(report.aggregates.size()));
    for (const AggregateRow& a : report.aggregates) {
        detail::put_str(out, a.tracker);
        detail::put_str(out, a.scenario);
        put_f64(out, a.de_mean);
        put_f64(out, a.de_std);
        put_f64(out, a.fs_mean);
        put_f64(out, a.fs_std);
    }
    return out;
}

inline MetricsReport deserialize_report(const std::vector<std::uint8_t>& bytes) {
    ByteReader in(bytes);
    if (in.str(4) != "UCFR") throw ContractError("report file: bad magic");
    if (in.u32() != kReportVersion) throw ContractError("report file: unsupported version");
    MetricsReport report;
    const std::uint32_t rows = in.u32();
    for (std::uint32_t i = 0; i < rows; ++i) {
        TrialRow r;
        r.subject = in.str(in.u32());
        r.tracker = in.str(in.u32());
        r.scenario = in.str(in.u32());
        r.trial = in.u32();
        r.de = in.f64();
        r.fs = in.f64();
        r.frames = in.u64();
        r.init_ok = in.u8() != 0;
        report.rows.push_back(std::move(r));
    }
    const std::uint32_t aggs = in.u32();
    for (std::uint32_t i = 0; i < aggs; ++i) {
        AggregateRow a;
        a.tracker = in.str(in.u32());
        a.scenario = in.str(in.u32());
        a.de_mean = in.f64();
        a.de_std = in.f64();
        a.fs_mean = in.f64();
        a.fs_std = in.f64();
        report.aggregates.push_back(std::move(a));
    }
    if (in.remaining() != 0) throw ContractError("report file: trailing bytes");
    return report;
}

inline void save_report(const std::string& path, const MetricsReport& report,
                        double fps_floor = kFpsFloor) {
    const auto bytes = serialize_report(report);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("cannot write report: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ContractError("short write on report: " + path);

    std::ofstream timing(path + ".timing.csv");
    if (!timing) throw ContractError("cannot write timing sidecar for " + path);
    timing << "subject,tracker,scenario,trial,fps,slow\n";
    char line[160];
    for (const TrialRow& r : report.rows) {
        std::snprintf(line, sizeof(line), "%s,%s,%s,%u,%.6f,%d\n", r.subject.c_str(),
                      r.tracker.c_str(), r.scenario.c_str(), r.trial, r.fps,
                      r.fps < fps_floor ? 1 : 0);
        timing << line;
    }
}

inline MetricsReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("cannot read report: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    MetricsReport report = deserialize_report(bytes);

    std::ifstream timing(path + ".timing.csv");
    if (timing) {
        std::string line;
        std::getline(timing, line);  // header
        std::size_t i = 0;
        while (std::getline(timing, line) && i < report.rows.size()) {
            const auto comma = line.rfind(",");
            const auto prev = line.rfind(",", comma - 1);
            if (comma != std::string::npos && prev != std::string::npos)
                report.rows[i].fps = std::stod(line.substr(prev + 1, comma - prev - 1));
            ++i;
        }
    }
    return report;
}

// summary.csv + per-metric trial tables for external plotting
inline void write_report_csvs(const MetricsReport& report, const std::string& out_dir,
                              double fps_floor = kFpsFloor) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ContractError("cannot create report directory: " + out_dir);

    std::ofstream summary(out_dir + "/summary.csv");
    if (!summary) throw ContractError("cannot write summary.csv in " + out_dir);
    summary << "tracker,scenario,subject,de_mean,de_std,fs_mean,fs_std,fps_mean,slow\n";
    char line[256];
    auto emit = [&](const std::string& tracker, const std::string& scenario,
                    const std::string& subject) {
        std::vector<double> des, fss, fpss;
        for (const TrialRow& r : report.rows)
            if (r.tracker == tracker && r.scenario == scenario &&
                (subject == "*" || r.subject == subject)) {
                des.push_back(r.de);
                fss.push_back(r.fs);
                fpss.push_back(r.fps);
            }
        if (des.empty()) return;
        const auto [dm, ds] = detail::mean_std(des);
        const auto [fm, fsd] = detail::mean_std(fss);
        const auto [pm, psd] = detail::mean_std(fpss);
        (void)psd;
        std::snprintf(line, sizeof(line), "%s,%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n",
                      tracker.c_str(), scenario.c_str(), subject.c_str(), dm, ds, fm, fsd, pm,
                      pm < fps_floor ? 1 : 0);
        summary << line;
    };
    std::vector<std::string> trackers, scenarios, subjects;
    for (const TrialRow& r : report.rows) {
        if (std::find(trackers.begin(), trackers.end(), r.tracker) == trackers.end())
            trackers.push_back(r.tracker);
        if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end())
            scenarios.push_back(r.scenario);
        if (std::find(subjects.begin(), subjects.end(), r.subject) == subjects.end())
            subjects.push_back(r.subject);
    }
    for (const auto& t : trackers)
        for (const auto& s : scenarios) {
            emit(t, s, "*");
            for (const auto& subj : subjects) emit(t, s, subj);
        }

    auto table = [&](const std::string& name, auto value) {
        std::ofstream csv(out_dir + "/" + name + ".csv");
        if (!csv) throw ContractError("cannot write " + name + ".csv in " + out_dir);
        csv << "tracker,scenario,subject,trial," << name << "\n";
        for (const TrialRow& r : report.rows) {
            std::snprintf(line, sizeof(line), "%s,%s,%s,%u,%.6f\n", r.tracker.c_str(),
                          r.scenario.c_str(), r.subject.c_str(), r.trial, value(r));
            csv << line;
        }
    };
    table("de", [](const TrialRow& r) { return r.de; });
    table("fs", [](const TrialRow& r) { return r.fs; });
    table("fps", [](const TrialRow& r) { return r.fps; });
}

// ---------------------------------------------------------------------------
// training orchestration

struct TrainReport {
    std::vector<double> epoch_loss;
    double heldout_iou_before = 0.0;
    double heldout_iou_after = 0.0;
    std::size_t train_sequences = 0, eval_sequences = 0, pairs = 0;
};

namespace detail {

// mean IOU of the tracker against annotations over full held-out sequences
inline double evaluate_heldout(const std::shared_ptr<DtrdModel>& model,
                               const std::vector<std::string>& dirs,
                               const std::vector<std::size_t>& eval_idx) {
    double total = 0.0;
    std::size_t count = 0;
    for (const std::size_t s : eval_idx) {
        const auto boxes = target_boxes(read_gt_csv(dirs[s]));
        if (boxes.size() < 2) continue;
        const std::size_t first = boxes.begin()->first;
        const std::size_t last = boxes.rbegin()->first;
        DtrdTracker tracker(model);
        tracker.init(read_rgbd(frame_file(dirs[s], first)), boxes.at(first));
        for (std::size_t f = first + 1; f <= last; ++f) {
            const auto [pred, conf] = tracker.step(read_rgbd(frame_file(dirs[s], f)));
            const auto gt = boxes.find(f);
            if (gt != boxes.end()) {
                total += iou(pred, gt->second);
                ++count;
            }
        }
    }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace detail

// 70/30 sequence split, pair sampling, epoch loop, held-out evaluation before
// and after. Writes the checkpoint and a per-epoch loss CSV.
inline TrainReport train_command(const std::string& corpus_dir, const Config& cfg,
                                 const std::string& checkpoint_path,
                                 const std::string& metrics_csv = "") {
    const auto dirs = list_sequences(corpus_dir);
    if (dirs.empty())
        throw ContractError("training corpus is empty: " + corpus_dir);

    const TrainSettings settings = train_settings_from(cfg);
    const double fraction = cfg.number("train.split_fraction", 0.7);
    const auto gap = static_cast<std::size_t>(cfg.integer("train.pair_gap", kPairGap));
    const auto pairs_per_seq =
        static_cast<std::size_t>(cfg.integer("train.pairs_per_sequence", 40));

    std::vector<std::vector<std::size_t>> visible(dirs.size());
    std::vector<std::map<std::size_t, BoundingBox>> boxes(dirs.size());
    for (std::size_t s = 0; s < dirs.size(); ++s) {
        boxes[s] = target_boxes(read_gt_csv(dirs[s]));
        for (const auto& [frame, box] : boxes[s]) visible[s].push_back(frame);
    }

    const auto [train_idx, eval_idx] = split_sequences(dirs.size(), fraction, settings.seed);
    TrainReport report;
    report.train_sequences = train_idx.size();
    report.eval_sequences = eval_idx.size();

    auto model = std::make_shared<DtrdModel>(tracker_config_from(cfg),
                                             mix_seed(settings.seed, "model-init"));
    report.heldout_iou_before = detail::evaluate_heldout(model, dirs, eval_idx);

    std::mt19937_64 pair_rng = make_rng(settings.seed, "pairs");
    const auto specs = sample_pair_specs(visible, train_idx, pairs_per_seq, gap, pair_rng);
    if (specs.empty()) throw ContractError("no usable training pairs in " + corpus_dir);
    report.pairs = specs.size();

    // one decoded copy of every referenced frame
    std::unordered_map<std::uint64_t, RgbdFrame> pool;
    auto frame_of = [&](std::size_t seq, std::size_t frame) -> const RgbdFrame& {
        const std::uint64_t key = (static_cast<std::uint64_t>(seq) << 32) | frame;
        auto it = pool.find(key);
        if (it == pool.end())
            it = pool.emplace(key, read_rgbd(frame_file(dirs[seq], frame))).first;
        return it->second;
    };

    Trainer trainer(model, settings);
    std::mt19937_64 order_rng = make_rng(settings.seed, "epoch-order");
    std::mt19937_64 jitter_rng = make_rng(settings.seed, "jitter");
    std::vector<std::size_t> order(specs.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double total = 0.0;
        for (const std::size_t i : order) {
            const PairSpec& p = specs[i];
            TrainPair pair{frame_of(p.sequence, p.frame_a), boxes[p.sequence].at(p.frame_a),
                           frame_of(p.sequence, p.frame_b), boxes[p.sequence].at(p.frame_b)};
            total += trainer.step(pair, jitter_rng);
        }
        report.epoch_loss.push_back(total / static_cast<double>(specs.size()));
    }

    report.heldout_iou_after = detail::evaluate_heldout(model, dirs, eval_idx);
    save_checkpoint(checkpoint_path, model->params());

    if (!metrics_csv.empty()) {
        std::ofstream csv(metrics_csv);
        if (!csv) throw ContractError("cannot write training metrics: " + metrics_csv);
        csv << "epoch,loss\n";
        for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
            csv << e + 1 << "," << report.epoch_loss[e] << "\n";
        csv << "heldout_iou_before," << report.heldout_iou_before << "\n";
        csv << "heldout_iou_after," << report.heldout_iou_after << "\n";
    }
    return report;
}

// load a checkpoint into a model built from the config
inline std::shared_ptr<DtrdModel> load_model(const Config& cfg, const std::string& checkpoint) {
    auto model = std::make_shared<DtrdModel>(tracker_config_from(cfg), 0);
    auto loaded = load_checkpoint(checkpoint);
    restore_params(model->params(), loaded);
    return model;
}

}  // namespace ucf
