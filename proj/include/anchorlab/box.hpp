#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace anchorlab {

// Axis-aligned box in continuous pixel coordinates. KITTI labels are
// real-valued, so no half-open pixel convention is applied:
// area = (right-left)*(bottom-top).
struct Box2D {
    double left = 0.0;
    double top = 0.0;
    double right = 0.0;
    double bottom = 0.0;

    double width() const { return right - left; }
    double height() const { return bottom - top; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (left + right); }
    double center_y() const { return 0.5 * (top + bottom); }

    bool operator==(const Box2D&) const = default;
};

inline Box2D box_from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

// Intersection over union. Degenerate (zero-area) boxes compare as 0
// against anything so the ratio never becomes 0/0.
inline double iou(const Box2D& a, const Box2D& b) {
    if (a.width() <= 0.0 || a.height() <= 0.0 || b.width() <= 0.0 || b.height() <= 0.0) {
        return 0.0;
    }
    const double iw = std::min(a.right, b.right) - std::max(a.left, b.left);
    const double ih = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

// The 4 relative coordinates regressed by an RPN: center offsets are
// expressed in anchor widths/heights, sizes as log-scale factors.
struct BoxDelta {
    double tx = 0.0;
    double ty = 0.0;
    double tw = 0.0;
    double th = 0.0;
};

inline Box2D apply_delta(const Box2D& anchor, const BoxDelta& d) {
    const double aw = anchor.width();
    const double ah = anchor.height();
    if (aw <= 0.0 || ah <= 0.0) {
        throw std::domain_error("apply_delta: anchor must have positive width and height");
    }
    const double cx = anchor.center_x() + d.tx * aw;
    const double cy = anchor.center_y() + d.ty * ah;
    const double w = aw * std::exp(d.tw);
    const double h = ah * std::exp(d.th);
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h)) {
        throw std::domain_error("apply_delta: non-finite result");
    }
    return box_from_center(cx, cy, w, h);
}

// Exact inverse of apply_delta.
inline BoxDelta compute_delta(const Box2D& anchor, const Box2D& target) {
    const double aw = anchor.width();
    const double ah = anchor.height();
    const double tw = target.width();
    const double th = target.height();
    if (aw <= 0.0 || ah <= 0.0) {
        throw std::domain_error("compute_delta: anchor must have positive width and height");
    }
    if (tw <= 0.0 || th <= 0.0) {
        throw std::domain_error("compute_delta: target must have positive width and height");
    }
    return {(target.center_x() - anchor.center_x()) / aw,
            (target.center_y() - anchor.center_y()) / ah,
            std::log(tw / aw),
            std::log(th / ah)};
}

// Intersect with the image rectangle [0,w]x[0,h]. A box fully outside
// collapses to a zero-area box on the nearest edge.
inline Box2D clip_box(const Box2D& b, double image_w, double image_h) {
    Box2D out;
    out.left = std::clamp(b.left, 0.0, image_w);
    out.right = std::clamp(b.right, 0.0, image_w);
    out.top = std::clamp(b.top, 0.0, image_h);
    out.bottom = std::clamp(b.bottom, 0.0, image_h);
    return out;
}

// Scale a box about its center by `factor` in each dimension, then clip to
// the image. factor 1.5 gives the context window of the detector study.
inline Box2D context_window(const Box2D& b, double factor, double image_w, double image_h) {
    if (factor <= 0.0) throw std::invalid_argument("context_window: factor must be positive");
    const Box2D scaled =
        box_from_center(b.center_x(), b.center_y(), b.width() * factor, b.height() * factor);
    return clip_box(scaled, image_w, image_h);
}

template <class T>
concept ScoredBox = requires(const T& t) {
    { t.bbox } -> std::convertible_to<Box2D>;
    { t.score } -> std::convertible_to<double>;
};

// Greedy non-maximum suppression in descending score order; ties keep the
// earlier input element. Survivors are returned sorted by descending score
// and no two of them overlap with IoU above the threshold.
template <ScoredBox T>
std::vector<T> nms(const std::vector<T>& dets, double iou_threshold) {
    for (const T& d : dets) {
        if (!std::isfinite(static_cast<double>(d.score))) {
            throw std::invalid_argument("nms: scores must be finite");
        }
    }
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dets[a].score > dets[b].score;
    });

    std::vector<T> kept;
    for (std::size_t idx : order) {
        bool suppressed = false;
        for (const T& k : kept) {
            if (iou(k.bbox, dets[idx].bbox) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(dets[idx]);
    }
    return kept;
}

}  // namespace anchorlab
