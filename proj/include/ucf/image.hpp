#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ucf/common.hpp"
#include "ucf/geometry.hpp"
#include "ucf/tensor.hpp"

namespace ucf {

inline constexpr double kDepthMax = 10.0;  // meters; fixed sensor range

// Planar channel-major raster (RGB in [0,1] + normalized depth).
struct Image4 {
    std::size_t h = 0, w = 0;
    std::vector<double> data;  // 4 * h * w

    Image4() = default;
    Image4(std::size_t h_, std::size_t w_) : h(h_), w(w_), data(4 * h_ * w_, 0.0) {}

    double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * h + y) * w + x]; }
    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * h + y) * w + x];
    }

    Tensor to_tensor() const { return Tensor::from_data({4, h, w}, data); }
};

// Camera frame: planar RGB in [0,1] plus a metric depth map.
struct RgbdFrame {
    std::size_t h = 0, w = 0;
    std::vector<double> rgb;    // 3 * h * w, planar
    std::vector<double> depth;  // h * w, meters in [0, kDepthMax]
    double timestamp = 0.0;

    RgbdFrame() = default;
    RgbdFrame(std::size_t h_, std::size_t w_)
        : h(h_), w(w_), rgb(3 * h_ * w_, 0.0), depth(h_ * w_, 0.0) {}

    double& color(std::size_t c, std::size_t y, std::size_t x) { return rgb[(c * h + y) * w + x]; }
    double color(std::size_t c, std::size_t y, std::size_t x) const {
        return rgb[(c * h + y) * w + x];
    }
    double& d(std::size_t y, std::size_t x) { return depth[y * w + x]; }
    double d(std::size_t y, std::size_t x) const { return depth[y * w + x]; }
};

// Channels 0-2 copy RGB; channel 3 is depth normalized by the sensor range.
inline Image4 fuse_rgbd(const RgbdFrame& frame, double d_max = kDepthMax) {
    Image4 out(frame.h, frame.w);
    const std::size_t hw = frame.h * frame.w;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < hw; ++i) out.data[c * hw + i] = frame.rgb[c * hw + i];
    for (std::size_t i = 0; i < hw; ++i) {
        const double d = std::clamp(frame.depth[i], 0.0, d_max);
        out.data[3 * hw + i] = d / d_max;
    }
    return out;
}

// --------------------------------------------------------------------------
// crop geometry (nearest-neighbor sampling throughout)

// Template crop: the box region padded to a square (aspect preserved) by
// replicating the crop's own edges, then resampled to size x size.
inline Image4 crop_box_region(const Image4& img, const BoundingBox& box, std::size_t size) {
    const double pw = static_cast<double>(img.w), ph = static_cast<double>(img.h);
    const double px1 = box.x1 * pw, px2 = box.x2 * pw;
    const double py1 = box.y1 * ph, py2 = box.y2 * ph;
    const double m = std::max(px2 - px1, py2 - py1);
    const double cx = 0.5 * (px1 + px2), cy = 0.5 * (py1 + py2);
    Image4 out(size, size);
    for (std::size_t oy = 0; oy < size; ++oy) {
        for (std::size_t ox = 0; ox < size; ++ox) {
            double u = cx - 0.5 * m + (ox + 0.5) * m / static_cast<double>(size);
            double v = cy - 0.5 * m + (oy + 0.5) * m / static_cast<double>(size);
            u = std::clamp(u, px1, px2);
            v = std::clamp(v, py1, py2);
            const std::size_t ix = static_cast<std::size_t>(
                std::clamp(std::floor(u), 0.0, pw - 1.0));
            const std::size_t iy = static_cast<std::size_t>(
                std::clamp(std::floor(v), 0.0, ph - 1.0));
            for (std::size_t c = 0; c < 4; ++c) out.at(c, oy, ox) = img.at(c, iy, ix);
        }
    }
    return out;
}

// Square search window in frame pixel coordinates, clamped inside the frame.
struct SearchWindow {
    double x0 = 0.0, y0 = 0.0, side = 0.0;
};

inline SearchWindow compute_search_window(const BoundingBox& box, double area_factor,
                                          std::size_t frame_w, std::size_t frame_h) {
    const double pw = static_cast<double>(frame_w), ph = static_cast<double>(frame_h);
    const double bw = (box.x2 - box.x1) * pw, bh = (box.y2 - box.y1) * ph;
    double side = area_factor * std::sqrt(bw * bh);
    side = std::min(side, std::min(pw, ph));
    const double cx = 0.5 * (box.x1 + box.x2) * pw;
    const double cy = 0.5 * (box.y1 + box.y2) * ph;
    SearchWindow win;
    win.side = side;
    win.x0 = std::clamp(cx - 0.5 * side, 0.0, pw - side);
    win.y0 = std::clamp(cy - 0.5 * side, 0.0, ph - side);
    return win;
}

inline Image4 crop_window(const Image4& img, const SearchWindow& win, std::size_t size) {
    const double pw = static_cast<double>(img.w), ph = static_cast<double>(img.h);
    Image4 out(size, size);
    for (std::size_t oy = 0; oy < size; ++oy) {
        for (std::size_t ox = 0; ox < size; ++ox) {
            const double u = win.x0 + (ox + 0.5) * win.side / static_cast<double>(size);
            const double v = win.y0 + (oy + 0.5) * win.side / static_cast<double>(size);
            const std::size_t ix = static_cast<std::size_t>(
                std::clamp(std::floor(u), 0.0, pw - 1.0));
            const std::size_t iy = static_cast<std::size_t>(
                std::clamp(std::floor(v), 0.0, ph - 1.0));
            for (std::size_t c = 0; c < 4; ++c) out.at(c, oy, ox) = img.at(c, iy, ix);
        }
    }
    return out;
}

// Frame-normalized box -> window-normalized box (and back). Exact inverses
// up to floating-point rounding.
inline BoundingBox box_to_window(const BoundingBox& b, const SearchWindow& win, std::size_t frame_w,
                                 std::size_t frame_h) {
    const double pw = static_cast<double>(frame_w), ph = static_cast<double>(frame_h);
    return BoundingBox((b.x1 * pw - win.x0) / win.side, (b.y1 * ph - win.y0) / win.side,
                       (b.x2 * pw - win.x0) / win.side, (b.y2 * ph - win.y0) / win.side);
}

inline BoundingBox box_from_window(const BoundingBox& b, const SearchWindow& win,
                                   std::size_t frame_w, std::size_t frame_h) {
    const double pw = static_cast<double>(frame_w), ph = static_cast<double>(frame_h);
    return BoundingBox((win.x0 + b.x1 * win.side) / pw, (win.y0 + b.y1 * win.side) / ph,
                       (win.x0 + b.x2 * win.side) / pw, (win.y0 + b.y2 * win.side) / ph);
}

}  // namespace ucf
