#pragma once

// Trial metrics. A trial log holds one record per simulated frame; the three
// headline numbers are distance error (DE), following success (FS) and
// tracker frame rate (FPS).

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "ucf/common.hpp"
#include "ucf/geometry.hpp"
#include "ucf/image.hpp"

namespace ucf {

inline constexpr double kFollowIouThreshold = 0.3;
inline constexpr std::size_t kFollowGraceFrames = 40;  // 2 s at 20 Hz
inline constexpr double kFpsFloor = 20.0;

struct FrameRecord {
    bool has_box = false;              // tracker produced an estimate this frame
    BoundingBox box{0.0, 0.0, 1.0, 1.0};
    double est_depth = 0.0;            // tracker-side distance estimate, m
    double true_distance = 0.0;        // robot-to-target ground truth, m
    std::optional<BoundingBox> gt_box; // target annotation, if in view
    double target_progress = 0.0;      // meters of target path walked so far
    double tracker_seconds = 0.0;      // wall-clock tracker cost this frame
};

struct TrialLog {
    std::vector<FrameRecord> frames;
    double target_path_length = 0.0;
};

// The tracker's distance measurement: median depth over the central half of
// the box (center crop at 50% width/height), robust to box edges overlapping
// background.
inline double box_median_depth(const RgbdFrame& frame, const BoundingBox& box) {
    const double cw = 0.5 * box.width(), ch = 0.5 * box.height();
    const double x1 = (box.cx() - 0.5 * cw) * static_cast<double>(frame.w);
    const double x2 = (box.cx() + 0.5 * cw) * static_cast<double>(frame.w);
    const double y1 = (box.cy() - 0.5 * ch) * static_cast<double>(frame.h);
    const double y2 = (box.cy() + 0.5 * ch) * static_cast<double>(frame.h);
    const long W = static_cast<long>(frame.w), H = static_cast<long>(frame.h);
    long px1 = std::max(0L, static_cast<long>(std::ceil(x1 - 0.5)));
    long px2 = std::min(W - 1, static_cast<long>(std::ceil(x2 - 0.5)) - 1);
    long py1 = std::max(0L, static_cast<long>(std::ceil(y1 - 0.5)));
    long py2 = std::min(H - 1, static_cast<long>(std::ceil(y2 - 0.5)) - 1);
    if (px1 > px2 || py1 > py2) {  // degenerate crop: nearest in-frame pixel
        px1 = px2 = std::clamp(static_cast<long>(box.cx() * frame.w), 0L, W - 1);
        py1 = py2 = std::clamp(static_cast<long>(box.cy() * frame.h), 0L, H - 1);
    }
    std::vector<double> depths;
    depths.reserve(static_cast<std::size_t>((px2 - px1 + 1) * (py2 - py1 + 1)));
    for (long y = py1; y <= py2; ++y)
        for (long x = px1; x <= px2; ++x)
            depths.push_back(frame.d(static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
    std::sort(depths.begin(), depths.end());
    const std::size_t n = depths.size();
    return n % 2 == 1 ? depths[n / 2] : 0.5 * (depths[n / 2 - 1] + depths[n / 2]);
}

// mean absolute distance error over frames where the tracker emitted a box
inline double compute_de(const TrialLog& log) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const FrameRecord& f : log.frames)
        if (f.has_box) {
            sum += std::abs(f.est_depth - f.true_distance);
            ++count;
        }
    if (count == 0) throw ContractError("DE needs at least one frame with a tracker output");
    return sum / static_cast<double>(count);
}

// Fraction of the target's path covered while the robot follows correctly
// (tracker box overlaps the target annotation with IOU >= 0.3). Forty
// consecutive bad frames end the trial's following credit for good.
inline double compute_fs(const TrialLog& log, double iou_threshold = kFollowIouThreshold,
                         std::size_t grace_frames = kFollowGraceFrames) {
    if (!(log.target_path_length > 0.0))
        throw ContractError("FS needs a positive target path length");
    double followed = 0.0, prev_progress = 0.0;
    std::size_t bad_run = 0;
    bool lost_for_good = false;
    for (const FrameRecord& f : log.frames) {
        const bool ok = !lost_for_good && f.has_box && f.gt_box.has_value() &&
                        iou(f.box, *f.gt_box) >= iou_threshold;
        if (ok) {
            followed += f.target_progress - prev_progress;
            bad_run = 0;
        } else if (!lost_for_good && ++bad_run >= grace_frames) {
            lost_for_good = true;
        }
        prev_progress = f.target_progress;
    }
    return std::clamp(followed / log.target_path_length, 0.0, 1.0 - 1e-9);
}

// frames per second of tracker compute, excluding rendering and world stepping
inline double compute_fps(const TrialLog& log) {
    double seconds = 0.0;
    std::size_t count = 0;
    for (const FrameRecord& f : log.frames)
        if (f.has_box) {
            seconds += f.tracker_seconds;
            ++count;
        }
    if (count == 0) throw ContractError("FPS needs at least one processed frame");
    if (!(seconds > 0.0)) throw ContractError("FPS needs a positive processing time");
    return static_cast<double>(count) / seconds;
}

}  // namespace ucf
