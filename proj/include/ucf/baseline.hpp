#pragma once

// Appearance-only template tracker used as the color-only comparison point.
// Tracks by normalized cross-correlation of a fixed RGB template over a
// search window at integer-pixel offsets; the box size never changes and the
// depth channel is never read.

#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "ucf/common.hpp"
#include "ucf/geometry.hpp"
#include "ucf/image.hpp"

namespace ucf {

struct BaselineConfig {
    std::size_t template_size = 16;   // resampled template resolution
    double search_area_factor = 4.0;  // same window policy as the main tracker
};

struct AppearanceTemplate {
    std::vector<double> patch;            // 3 x S x S, channel-major
    std::vector<double> color_histogram;  // 8x8x8 normalized bin counts
};

namespace detail {

inline std::vector<double> rgb_patch(const Image4& img, const BoundingBox& box,
                                     std::size_t size) {
    Image4 crop = crop_box_region(img, box, size);
    std::vector<double> rgb(3 * size * size);
    std::copy(crop.data.begin(), crop.data.begin() + static_cast<std::ptrdiff_t>(rgb.size()),
              rgb.begin());
    return rgb;
}

// Joint normalized cross-correlation over all channels; patches without any
// variation carry no localization signal and correlate to 0.
inline double ncc(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa < 1e-12 || sbb < 1e-12) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

inline AppearanceTemplate make_appearance_template(const std::vector<double>& rgb,
                                                   std::size_t size) {
    AppearanceTemplate t;
    t.patch = rgb;
    t.color_histogram.assign(8 * 8 * 8, 0.0);
    const std::size_t px = size * size;
    for (std::size_t i = 0; i < px; ++i) {
        std::size_t idx = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = rgb[c * px + i];
            const auto bin = static_cast<std::size_t>(
                std::min(7.0, std::max(0.0, std::floor(v * 8.0))));
            idx = idx * 8 + bin;
        }
        t.color_histogram[idx] += 1.0;
    }
    for (double& v : t.color_histogram) v /= static_cast<double>(px);
    return t;
}

class BaselineTracker {
public:
    explicit BaselineTracker(BaselineConfig cfg = BaselineConfig{}) : cfg_(cfg) {}

    void init(const RgbdFrame& frame, const BoundingBox& box) {
        if (box.x1 < 0.0 || box.y1 < 0.0 || box.x2 > 1.0 || box.y2 > 1.0)
            throw ContractError("baseline init: box outside frame");
        const Image4 fused = fuse_rgbd(frame);
        template_ = make_appearance_template(
            detail::rgb_patch(fused, box, cfg_.template_size), cfg_.template_size);
        prev_box_ = box;
        initialized_ = true;
    }

    // Slides the template over the search window one pixel at a time; the
    // best-correlated placement becomes the new box (same size as before).
    // Ties keep the first candidate in scan order (top-left first).
    std::pair<BoundingBox, double> step(const RgbdFrame& frame) {
        if (!initialized_) throw ContractError("baseline step: tracker not initialized");
        const Image4 fused = fuse_rgbd(frame);
        const double w = static_cast<double>(frame.w), h = static_cast<double>(frame.h);
        const SearchWindow win =
            compute_search_window(prev_box_, cfg_.search_area_factor, frame.w, frame.h);

        const double px1 = prev_box_.x1 * w, px2 = prev_box_.x2 * w;
        const double py1 = prev_box_.y1 * h, py2 = prev_box_.y2 * h;
        long dx_lo = static_cast<long>(std::ceil(win.x0 - px1));
        long dx_hi = static_cast<long>(std::floor(win.x0 + win.side - px2));
        long dy_lo = static_cast<long>(std::ceil(win.y0 - py1));
        long dy_hi = static_cast<long>(std::floor(win.y0 + win.side - py2));
        if (dx_lo > dx_hi) dx_lo = dx_hi = 0;
        if (dy_lo > dy_hi) dy_lo = dy_hi = 0;

        double best = -2.0;
        BoundingBox best_box = prev_box_;
        for (long dy = dy_lo; dy <= dy_hi; ++dy) {
            for (long dx = dx_lo; dx <= dx_hi; ++dx) {
                const BoundingBox cand(prev_box_.x1 + static_cast<double>(dx) / w,
                                       prev_box_.y1 + static_cast<double>(dy) / h,
                                       prev_box_.x2 + static_cast<double>(dx) / w,
                                       prev_box_.y2 + static_cast<double>(dy) / h);
                const std::vector<double> rgb =
                    detail::rgb_patch(fused, cand, cfg_.template_size);
                const double score = detail::ncc(template_.patch, rgb);
                if (score > best) {
                    best = score;
                    best_box = cand;
                }
            }
        }
        prev_box_ = best_box;
        return {best_box, 0.5 * (best + 1.0)};
    }

    const AppearanceTemplate& appearance() const {
        if (!initialized_) throw ContractError("baseline appearance: tracker not initialized");
        return template_;
    }
    const BaselineConfig& config() const { return cfg_; }

private:
    BaselineConfig cfg_;
    AppearanceTemplate template_;
    BoundingBox prev_box_{0.0, 0.0, 1.0, 1.0};
    bool initialized_ = false;
};

}  // namespace ucf
