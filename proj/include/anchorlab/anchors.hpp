#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "anchorlab/box.hpp"
#include "anchorlab/rng.hpp"

namespace anchorlab {

// Anchor prototype: a (width, height) pair in original-image pixels.
struct AnchorShape {
    double width = 0.0;
    double height = 0.0;

    bool operator==(const AnchorShape&) const = default;
};

// Reference anchors a la Faster R-CNN: a base x base square reshaped by each
// (scale, ratio) combination. ratio = height/width; the area (base*scale)^2
// is preserved exactly within each scale.
inline std::vector<AnchorShape> default_anchor_shapes(double base, std::span<const double> scales,
                                                      std::span<const double> ratios) {
    if (base <= 0.0) throw std::invalid_argument("default_anchor_shapes: base must be positive");
    for (double s : scales) {
        if (s <= 0.0) throw std::invalid_argument("default_anchor_shapes: scales must be positive");
    }
    for (double r : ratios) {
        if (r <= 0.0) throw std::invalid_argument("default_anchor_shapes: ratios must be positive");
    }
    std::vector<AnchorShape> shapes;
    shapes.reserve(scales.size() * ratios.size());
    for (double s : scales) {
        const double side = base * s;
        for (double r : ratios) {
            shapes.push_back({side / std::sqrt(r), side * std::sqrt(r)});
        }
    }
    return shapes;
}

struct KMeansResult {
    std::vector<AnchorShape> shapes;        // final centroids in (w,h) space
    double objective = 0.0;                 // sum of squared distances to nearest centroid
    std::vector<double> objective_history;  // one entry per Lloyd iteration, non-increasing
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline double shape_dist2(const AnchorShape& a, const AnchorShape& b) {
    const double dw = a.width - b.width;
    const double dh = a.height - b.height;
    return dw * dw + dh * dh;
}

// k-means++ seeding; all randomness comes from the caller's stream so the
// whole run is reproducible from (observations, k, seed).
inline std::vector<AnchorShape> kmeans_pp_init(std::span<const AnchorShape> obs, int k,
                                               SplitMix64& rng) {
    std::vector<AnchorShape> centroids;
    centroids.reserve(static_cast<std::size_t>(k));
    centroids.push_back(obs[rng.next_below(obs.size())]);

    std::vector<double> dist2(obs.size(), 0.0);
    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const AnchorShape& c : centroids) {
                best = std::min(best, shape_dist2(obs[i], c));
            }
            dist2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // every observation coincides with a centroid already
            centroids.push_back(obs[rng.next_below(obs.size())]);
            continue;
        }
        const double target = rng.next_double() * total;
        double cumulative = 0.0;
        std::size_t pick = obs.size() - 1;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            cumulative += dist2[i];
            if (cumulative > target) {
                pick = i;
                break;
            }
        }
        centroids.push_back(obs[pick]);
    }
    return centroids;
}

}  // namespace detail

// Lloyd's algorithm over bounding-box shapes: given ground-truth (w,h)
// observations, find k anchors minimizing the summed squared shape-space
// distance from each observation to its nearest anchor. Deterministic for a
// fixed (observations, k, seed); ties in assignment go to the lowest centroid
// index and an emptied cluster is re-seeded to the observation farthest from
// its assigned centroid.
inline KMeansResult kmeans_anchor_shapes(std::span<const AnchorShape> observations, int k,
                                         std::uint64_t seed, int max_iterations = 100,
                                         double tolerance = 1e-6) {
    if (observations.empty()) throw std::invalid_argument("kmeans: no observations");
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (static_cast<std::size_t>(k) > observations.size()) {
        throw std::invalid_argument("kmeans: k exceeds the number of observations");
    }
    for (const AnchorShape& s : observations) {
        if (s.width <= 0.0 || s.height <= 0.0) {
            throw std::invalid_argument("kmeans: observations must have positive width and height");
        }
    }

    SplitMix64 rng(seed);
    KMeansResult result;
    result.shapes = detail::kmeans_pp_init(observations, k, rng);

    const std::size_t n = observations.size();
    std::vector<int> assignment(n, 0);
    std::vector<double> nearest2(n, 0.0);

    for (int iter = 0; iter < max_iterations; ++iter) {
        // assignment step
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = detail::shape_dist2(observations[i], result.shapes[0]);
            for (int c = 1; c < k; ++c) {
                const double d = detail::shape_dist2(observations[i], result.shapes[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assignment[i] = best;
            nearest2[i] = best_d;
            objective += best_d;
        }
        if (!result.objective_history.empty()) {
            // Lloyd guarantees monotone descent; tolerate only rounding noise
            const double prev = result.objective_history.back();
            if (objective > prev * (1.0 + 1e-12) + 1e-12) {
                throw std::logic_error("kmeans: objective increased between iterations");
            }
        }
        result.objective_history.push_back(objective);
        result.objective = objective;
        result.iterations = iter + 1;

        // update step
        std::vector<double> sum_w(static_cast<std::size_t>(k), 0.0);
        std::vector<double> sum_h(static_cast<std::size_t>(k), 0.0);
        std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assignment[i]);
            sum_w[c] += observations[i].width;
            sum_h[c] += observations[i].height;
            ++count[c];
        }

        double movement = 0.0;
        for (int c = 0; c < k; ++c) {
            const auto cs = static_cast<std::size_t>(c);
            if (count[cs] == 0) {
                // re-seed to the observation farthest from its assigned centroid
                std::size_t farthest = 0;
                for (std::size_t i = 1; i < n; ++i) {
                    if (nearest2[i] > nearest2[farthest]) farthest = i;
                }
                const AnchorShape moved = observations[farthest];
                movement = std::max(movement, std::sqrt(detail::shape_dist2(result.shapes[cs], moved)));
                result.shapes[cs] = moved;
                assignment[farthest] = c;
                nearest2[farthest] = 0.0;
                continue;
            }
            const AnchorShape mean{sum_w[cs] / static_cast<double>(count[cs]),
                                   sum_h[cs] / static_cast<double>(count[cs])};
            movement = std::max(movement, std::sqrt(detail::shape_dist2(result.shapes[cs], mean)));
            result.shapes[cs] = mean;
        }

        if (movement < tolerance) {
            result.converged = true;
            break;
        }
    }

    // final objective against the final centroids
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            best_d = std::min(best_d, detail::shape_dist2(observations[i], result.shapes[static_cast<std::size_t>(c)]));
        }
        objective += best_d;
    }
    result.objective = objective;
    return result;
}

// Plain-Euclidean companion number for the squared objective, reported by the
// CLI for comparison.
inline double euclidean_distance_sum(std::span<const AnchorShape> observations,
                                     std::span<const AnchorShape> shapes) {
    double total = 0.0;
    for (const AnchorShape& o : observations) {
        double best = std::numeric_limits<double>::infinity();
        for (const AnchorShape& s : shapes) {
            best = std::min(best, detail::shape_dist2(o, s));
        }
        total += std::sqrt(best);
    }
    return total;
}

// k anchor boxes centered at every feature-map cell. Cell (i,j) has its
// center at ((i+0.5)*stride, (j+0.5)*stride) in image coordinates.
struct AnchorGrid {
    int cols = 0;
    int rows = 0;
    double stride = 0.0;
    std::vector<AnchorShape> shapes;

    std::size_t anchor_count() const {
        return static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows) * shapes.size();
    }
    double center_x(int i) const { return (i + 0.5) * stride; }
    double center_y(int j) const { return (j + 0.5) * stride; }
    Box2D anchor_box(int i, int j, std::size_t shape_idx) const {
        const AnchorShape& s = shapes[shape_idx];
        return box_from_center(center_x(i), center_y(j), s.width, s.height);
    }
};

inline AnchorGrid place_anchors(double image_w, double image_h, double stride,
                                std::vector<AnchorShape> shapes) {
    if (stride < 1.0) throw std::invalid_argument("place_anchors: stride must be >= 1");
    const int cols = static_cast<int>(std::floor(image_w / stride));
    const int rows = static_cast<int>(std::floor(image_h / stride));
    if (cols < 1 || rows < 1) {
        throw std::invalid_argument("place_anchors: stride larger than image");
    }
    return {cols, rows, stride, std::move(shapes)};
}

// Worst-case distance from a ground-truth center to the nearest anchor
// center: half the diagonal of one feature cell.
inline double worst_case_center_distance(double stride) {
    if (stride < 1.0) throw std::invalid_argument("worst_case_center_distance: stride must be >= 1");
    return stride * std::sqrt(2.0) / 2.0;
}

// Per-ground-truth anchor coverage. Distances are reported in
// original-image coordinates: when the image fed to the network was
// upsampled by `upsampling`, grid-space distances shrink by that factor.
struct CoverageStats {
    std::vector<double> best_iou;         // per ground-truth box
    std::vector<double> center_distance;  // per ground-truth box, original coords
    double mean_best_iou = 0.0;
    double max_center_distance = 0.0;
    double mean_center_distance = 0.0;
    std::vector<std::size_t> distance_histogram;  // counts per bin
    double histogram_bin_width = 1.0;             // original-coordinate pixels
};

inline CoverageStats coverage_report(std::span<const Box2D> gt_boxes, const AnchorGrid& grid,
                                     double upsampling = 1.0, double histogram_bin_width = 1.0) {
    if (grid.cols < 1 || grid.rows < 1 || grid.shapes.empty()) {
        throw std::invalid_argument("coverage_report: empty anchor grid");
    }
    if (upsampling <= 0.0) throw std::invalid_argument("coverage_report: upsampling must be positive");

    CoverageStats stats;
    stats.histogram_bin_width = histogram_bin_width;
    if (gt_boxes.empty()) return stats;

    for (const Box2D& gt : gt_boxes) {
        double best_iou = 0.0;
        for (int j = 0; j < grid.rows; ++j) {
            for (int i = 0; i < grid.cols; ++i) {
                for (std::size_t s = 0; s < grid.shapes.size(); ++s) {
                    best_iou = std::max(best_iou, iou(gt, grid.anchor_box(i, j, s)));
                }
            }
        }

        // nearest cell center; clamp handles centers outside the grid span
        const double cx = gt.center_x();
        const double cy = gt.center_y();
        const int ci = std::clamp(static_cast<int>(std::floor(cx / grid.stride)), 0, grid.cols - 1);
        const int cj = std::clamp(static_cast<int>(std::floor(cy / grid.stride)), 0, grid.rows - 1);
        double nearest = std::numeric_limits<double>::infinity();
        for (int dj = -1; dj <= 1; ++dj) {
            for (int di = -1; di <= 1; ++di) {
                const int i = std::clamp(ci + di, 0, grid.cols - 1);
                const int j = std::clamp(cj + dj, 0, grid.rows - 1);
                const double dx = grid.center_x(i) - cx;
                const double dy = grid.center_y(j) - cy;
                nearest = std::min(nearest, std::hypot(dx, dy));
            }
        }

        stats.best_iou.push_back(best_iou);
        stats.center_distance.push_back(nearest / upsampling);
    }

    double iou_sum = 0.0;
    double dist_sum = 0.0;
    for (std::size_t i = 0; i < stats.best_iou.size(); ++i) {
        iou_sum += stats.best_iou[i];
        dist_sum += stats.center_distance[i];
        stats.max_center_distance = std::max(stats.max_center_distance, stats.center_distance[i]);
    }
    const auto n = static_cast<double>(stats.best_iou.size());
    stats.mean_best_iou = iou_sum / n;
    stats.mean_center_distance = dist_sum / n;

    stats.distance_histogram.assign(
        static_cast<std::size_t>(std::floor(stats.max_center_distance / histogram_bin_width)) + 1, 0);
    for (double d : stats.center_distance) {
        auto bin = static_cast<std::size_t>(std::floor(d / histogram_bin_width));
        bin = std::min(bin, stats.distance_histogram.size() - 1);
        ++stats.distance_histogram[bin];
    }
    return stats;
}

}  // namespace anchorlab
