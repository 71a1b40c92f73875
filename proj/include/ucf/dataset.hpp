#pragma once

// Sequence recording and replay. A recorded trial is one directory with
// per-frame binary images (NNNNNN.rgbd), box annotations (gt.csv) and the
// world log (world.csv); the same layout doubles as the training corpus.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ucf/common.hpp"
#include "ucf/control.hpp"
#include "ucf/geometry.hpp"
#include "ucf/image.hpp"
#include "ucf/sim.hpp"

namespace ucf {

inline constexpr std::uint64_t kRecordFrames = 200;  // frames per corpus sequence
inline constexpr std::uint64_t kCorpusSequences = 45;
inline constexpr std::size_t kPairGap = 50;  // max frame distance inside a pair

// ---------------------------------------------------------------------------
// .rgbd frame files: "RGBD", u32 width, u32 height, H*W*3 u8 color,
// H*W u16 depth in millimeters, all little-endian

inline std::vector<std::uint8_t> encode_rgbd(const RgbdFrame& frame) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + frame.h * frame.w * 5);
    for (char c : {'R', 'G', 'B', 'D'}) out.push_back(static_cast<std::uint8_t>(c));
    put_u32(out, static_cast<std::uint32_t>(frame.w));
    put_u32(out, static_cast<std::uint32_t>(frame.h));
    for (std::size_t y = 0; y < frame.h; ++y)
        for (std::size_t x = 0; x < frame.w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(frame.color(c, y, x), 0.0, 1.0);
                out.push_back(static_cast<std::uint8_t>(std::llround(v * 255.0)));
            }
    for (std::size_t y = 0; y < frame.h; ++y)
        for (std::size_t x = 0; x < frame.w; ++x) {
            const double mm = std::clamp(frame.d(y, x) * 1000.0, 0.0, 65535.0);
            put_u16(out, static_cast<std::uint16_t>(std::llround(mm)));
        }
    return out;
}

inline RgbdFrame decode_rgbd(const std::vector<std::uint8_t>& bytes) {
    ByteReader in(bytes);
    if (in.str(4) != "RGBD") throw ContractError("rgbd file: bad magic");
    const std::size_t w = in.u32(), h = in.u32();
    if (w == 0 || h == 0) throw ContractError("rgbd file: empty image");
    RgbdFrame frame(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) frame.color(c, y, x) = in.u8() / 255.0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) frame.d(y, x) = in.u16() / 1000.0;
    if (in.remaining() != 0) throw ContractError("rgbd file: trailing bytes");
    return frame;
}

inline void write_rgbd(const std::string& path, const RgbdFrame& frame) {
    const auto bytes = encode_rgbd(frame);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("cannot write frame file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ContractError("short write on frame file: " + path);
}

inline RgbdFrame read_rgbd(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("cannot read frame file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_rgbd(bytes);
}

inline std::string frame_file(const std::string& dir, std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.rgbd", index);
    return dir + "/" + name;
}

// ---------------------------------------------------------------------------
// annotations

struct GtRow {
    std::size_t frame = 0;
    std::size_t agent = 0;
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
    bool visible = false;
};

struct WorldRow {
    std::size_t frame = 0;
    std::size_t body = 0;  // 0 = robot, i+1 = agent i
    double x = 0.0, y = 0.0, theta = 0.0;
};

// Records one simulator run: frames as they are rendered, one gt.csv row per
// (frame, agent) and one world.csv row per (frame, body).
class SequenceWriter {
public:
    SequenceWriter(std::string dir, CameraModel cam) : dir_(std::move(dir)), cam_(cam) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ContractError("cannot create sequence directory: " + dir_);
    }

    void add(const WorldState& world, const RgbdFrame& frame) {
        write_rgbd(frame_file(dir_, frames_), frame);
        for (std::size_t i = 0; i < world.agents.size(); ++i) {
            GtRow row;
            row.frame = frames_;
            row.agent = i;
            if (const auto box = ground_truth_bbox(world, cam_, i)) {
                row.x1 = box->x1;
                row.y1 = box->y1;
                row.x2 = box->x2;
                row.y2 = box->y2;
                row.visible = true;
            }
            gt_.push_back(row);
        }
        world_.push_back({frames_, 0, world.robot.x, world.robot.y, world.robot.theta});
        for (std::size_t i = 0; i < world.agents.size(); ++i) {
            const Agent& a = world.agents[i];
            world_.push_back(
                {frames_, i + 1, a.pos.x, a.pos.y, std::atan2(a.facing.y, a.facing.x)});
        }
        ++frames_;
    }

    void finish() {
        std::ofstream gt(dir_ + "/gt.csv");
        if (!gt) throw ContractError("cannot write gt.csv in " + dir_);
        char line[160];
        for (const GtRow& r : gt_) {
            std::snprintf(line, sizeof(line), "%zu,%zu,%.6f,%.6f,%.6f,%.6f,%d\n", r.frame,
                          r.agent, r.x1, r.y1, r.x2, r.y2, r.visible ? 1 : 0);
            gt << line;
        }
        std::ofstream wl(dir_ + "/world.csv");
        if (!wl) throw ContractError("cannot write world.csv in " + dir_);
        for (const WorldRow& r : world_) {
            std::snprintf(line, sizeof(line), "%zu,%zu,%.6f,%.6f,%.6f\n", r.frame, r.body, r.x,
                          r.y, r.theta);
            wl << line;
        }
    }

    std::size_t frames() const { return frames_; }

private:
    std::string dir_;
    CameraModel cam_;
    std::size_t frames_ = 0;
    std::vector<GtRow> gt_;
    std::vector<WorldRow> world_;
};

inline std::vector<GtRow> read_gt_csv(const std::string& dir) {
    std::ifstream in(dir + "/gt.csv");
    if (!in) throw ContractError("cannot read gt.csv in " + dir);
    std::vector<GtRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        GtRow r;
        int visible = 0;
        if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf,%lf,%lf,%d", &r.frame, &r.agent, &r.x1,
                        &r.y1, &r.x2, &r.y2, &visible) != 7)
            throw ContractError("malformed gt.csv line: " + line);
        r.visible = visible != 0;
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<WorldRow> read_world_csv(const std::string& dir) {
    std::ifstream in(dir + "/world.csv");
    if (!in) throw ContractError("cannot read world.csv in " + dir);
    std::vector<WorldRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        WorldRow r;
        if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf,%lf", &r.frame, &r.body, &r.x, &r.y,
                        &r.theta) != 5)
            throw ContractError("malformed world.csv line: " + line);
        rows.push_back(r);
    }
    return rows;
}

// target boxes by frame (the corpus target is agent 0)
inline std::map<std::size_t, BoundingBox> target_boxes(const std::vector<GtRow>& rows,
                                                       std::size_t agent = 0) {
    std::map<std::size_t, BoundingBox> out;
    for (const GtRow& r : rows)
        if (r.agent == agent && r.visible) out.emplace(r.frame, BoundingBox(r.x1, r.y1, r.x2, r.y2));
    return out;
}

// ---------------------------------------------------------------------------
// recording

// Ground-truth servoing: the robot is driven straight from the annotations so
// recorded sequences look like footage from a following robot without needing
// a tracker (which does not exist until this data trains it).
inline std::size_t record_sequence(const std::string& dir, ScenarioKind kind,
                                   const SubjectPreset& subject, const CameraModel& cam,
                                   std::uint64_t seed, std::size_t frames = kRecordFrames,
                                   double sigma_rgb = 0.01, double sigma_depth = 0.02) {
    WorldState world = make_world(kind, subject);
    SequenceWriter writer(dir, cam);
    PIController lin = default_linear_controller();
    PIController ang = default_angular_controller();
    std::mt19937_64 noise = make_rng(seed, "record-noise");
    const std::size_t target = world.target_index();

    for (std::size_t f = 0; f < frames; ++f) {
        const RgbdFrame frame = render_rgbd(world, cam, &noise, sigma_rgb, sigma_depth);
        writer.add(world, frame);

        const auto box = ground_truth_bbox(world, cam, target);
        const Agent& t = world.agents[target];
        const double dist = std::hypot(t.pos.x - world.robot.x, t.pos.y - world.robot.y);
        const auto [v, omega] = follow_control(box, dist, lin, ang, kSimDt);
        world.robot.v = v;
        world.robot.omega = omega;
        step_world(world);
    }
    writer.finish();
    return writer.frames();
}

// the default training corpus: scenarios x subjects cycled across 45 runs
inline std::vector<std::string> generate_corpus(const std::string& root, std::uint64_t seed,
                                                const CameraModel& cam,
                                                std::size_t sequences = kCorpusSequences,
                                                std::size_t frames = kRecordFrames,
                                                double sigma_rgb = 0.01,
                                                double sigma_depth = 0.02) {
    static const ScenarioKind kinds[] = {ScenarioKind::none, ScenarioKind::one_cross,
                                         ScenarioKind::two_cross, ScenarioKind::two_parallel};
    std::vector<std::string> dirs;
    for (std::size_t s = 0; s < sequences; ++s) {
        char name[32];
        std::snprintf(name, sizeof(name), "seq_%03zu", s);
        const std::string dir = root + "/" + name;
        const ScenarioKind kind = kinds[s % 4];
        const SubjectPreset subject = (s / 4) % 2 == 0 ? subject_a() : subject_b();
        record_sequence(dir, kind, subject, cam, mix_seed(seed, "corpus", s), frames,
                        sigma_rgb, sigma_depth);
        dirs.push_back(dir);
    }
    return dirs;
}

inline std::vector<std::string> list_sequences(const std::string& root) {
    std::vector<std::string> dirs;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(root, ec))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "gt.csv"))
            dirs.push_back(entry.path().string());
    if (ec) throw ContractError("cannot list dataset directory: " + root);
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

// ---------------------------------------------------------------------------
// train/eval split and pair sampling

// sequence-level split: shuffled indices, first round(fraction*n) train
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_sequences(
    std::size_t count, double fraction, std::uint64_t seed) {
    if (count == 0) throw ContractError("cannot split an empty dataset");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng = make_rng(seed, "split");
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(count)));
    std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> eval(order.begin() + n_train, order.end());
    return {train, eval};
}

struct PairSpec {
    std::size_t sequence = 0;
    std::size_t frame_a = 0;  // template
    std::size_t frame_b = 0;  // search
};

// Two target-visible frames at most `gap` apart from one sequence. Frames
// with the target out of view are never sampled.
inline std::vector<PairSpec> sample_pair_specs(
    const std::vector<std::vector<std::size_t>>& visible_frames,
    const std::vector<std::size_t>& sequences, std::size_t pairs_per_sequence, std::size_t gap,
    std::mt19937_64& rng) {
    std::vector<PairSpec> out;
    for (const std::size_t s : sequences) {
        const auto& frames = visible_frames[s];
        if (frames.size() < 2) continue;
        std::uniform_int_distribution<std::size_t> pick(0, frames.size() - 1);
        for (std::size_t p = 0; p < pairs_per_sequence; ++p) {
            for (int attempt = 0; attempt < 64; ++attempt) {
                const std::size_t a = pick(rng), b = pick(rng);
                const std::size_t lo = std::min(frames[a], frames[b]);
                const std::size_t hi = std::max(frames[a], frames[b]);
                if (a == b || hi - lo > gap) continue;
                out.push_back({s, frames[a], frames[b]});
                break;
            }
        }
    }
    return out;
}

}  // namespace ucf
