#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anchorlab/anchors.hpp"
#include "anchorlab/box.hpp"
#include "anchorlab/kitti.hpp"
#include "anchorlab/rng.hpp"

namespace anchorlab {

/*----------------------------------------------------------------------
  Synthetic detector: perturbs ground truth into detection files so the
  parse -> match -> AP pipeline can be exercised end to end without any
  trained network.
----------------------------------------------------------------------*/

enum class ScoreModel {
    IouBased,  // score = IoU against the ground truth of the frame
    Random,    // score uniform in [0,1)
};

struct PerturbConfig {
    double center_noise_sigma = 0.0;  // pixels, gaussian jitter of the box center
    double scale_noise_sigma = 0.0;   // log-scale gaussian jitter of width/height
    double drop_rate = 0.0;           // probability of dropping a ground-truth box
    double false_positive_rate = 0.0; // expected spurious boxes per image (Poisson)
    ScoreModel score_model = ScoreModel::IouBased;
    std::uint64_t seed = 0;
    double image_width = 1242.0;  // KITTI native resolution
    double image_height = 375.0;

    void validate() const {
        if (center_noise_sigma < 0.0 || scale_noise_sigma < 0.0) {
            throw std::invalid_argument("perturb: noise sigmas must be >= 0");
        }
        if (drop_rate < 0.0 || drop_rate > 1.0) {
            throw std::invalid_argument("perturb: drop_rate must lie in [0,1]");
        }
        if (false_positive_rate < 0.0) {
            throw std::invalid_argument("perturb: false_positive_rate must be >= 0");
        }
        if (image_width <= 0.0 || image_height <= 0.0) {
            throw std::invalid_argument("perturb: image dimensions must be positive");
        }
    }
};

namespace detail {

// boxes thinner than this after clipping are discarded; anything smaller
// would not survive the 2-decimal serialization as a valid box
constexpr double kMinPerturbedSide = 0.05;

inline double frame_score(const Box2D& box, std::span<const GroundTruthObject> gts,
                          ScoreModel model, SplitMix64& rng) {
    if (model == ScoreModel::Random) return rng.next_double();
    double best = 0.0;
    for (const GroundTruthObject& gt : gts) {
        if (gt.dont_care()) continue;
        best = std::max(best, iou(box, gt.bbox));
    }
    return best;
}

}  // namespace detail

// Perturbs the ground truth of one frame. The random stream is consumed in
// a fixed order per object (drop, center x/y, scale w/h) so the output is a
// pure function of (gts, shape_pool, stream state).
inline std::vector<Detection> perturb_frame(std::span<const GroundTruthObject> gts,
                                            std::span<const AnchorShape> shape_pool,
                                            const PerturbConfig& config, SplitMix64& rng) {
    config.validate();
    std::vector<Detection> dets;
    for (const GroundTruthObject& gt : gts) {
        if (gt.dont_care()) continue;
        const double u_drop = rng.next_double();
        BoxDelta delta;
        delta.tx = rng.next_gauss() * config.center_noise_sigma / gt.bbox.width();
        delta.ty = rng.next_gauss() * config.center_noise_sigma / gt.bbox.height();
        delta.tw = rng.next_gauss() * config.scale_noise_sigma;
        delta.th = rng.next_gauss() * config.scale_noise_sigma;
        if (u_drop < config.drop_rate) continue;

        const Box2D jittered =
            clip_box(apply_delta(gt.bbox, delta), config.image_width, config.image_height);
        if (jittered.width() < detail::kMinPerturbedSide ||
            jittered.height() < detail::kMinPerturbedSide) {
            continue;
        }
        Detection det;
        static_cast<GroundTruthObject&>(det) = gt;
        det.bbox = jittered;
        det.score = config.score_model == ScoreModel::IouBased ? iou(jittered, gt.bbox)
                                                               : rng.next_double();
        dets.push_back(std::move(det));
    }

    const int spurious = rng.next_poisson(config.false_positive_rate);
    for (int i = 0; i < spurious && !shape_pool.empty(); ++i) {
        const AnchorShape shape = shape_pool[rng.next_below(shape_pool.size())];
        const double cx = rng.next_double() * config.image_width;
        const double cy = rng.next_double() * config.image_height;
        const Box2D box = clip_box(box_from_center(cx, cy, shape.width, shape.height),
                                   config.image_width, config.image_height);
        if (box.width() < detail::kMinPerturbedSide || box.height() < detail::kMinPerturbedSide) {
            continue;
        }
        Detection det;
        det.class_name = "Car";
        det.truncation = -1.0;
        det.occlusion = -1;
        det.alpha = -10.0;
        det.bbox = box;
        det.dim_height = det.dim_width = det.dim_length = -1.0;
        det.loc_x = det.loc_y = det.loc_z = -1000.0;
        det.rotation_y = -10.0;
        det.score = detail::frame_score(box, gts, config.score_model, rng);
        dets.push_back(std::move(det));
    }
    return dets;
}

// Collects the (w,h) pool that spurious boxes are drawn from: every
// non-DontCare ground-truth shape in the dataset, in frame order.
inline std::vector<AnchorShape> collect_shape_pool(const std::filesystem::path& gt_dir) {
    std::vector<AnchorShape> pool;
    for (const FrameFile& frame : list_frame_files(gt_dir)) {
        for (const GroundTruthObject& gt : read_label_file(frame.path)) {
            if (!gt.dont_care()) pool.push_back({gt.bbox.width(), gt.bbox.height()});
        }
    }
    return pool;
}

// Writes one detection file per ground-truth frame into out_dir. Each frame
// uses an independent stream derived from (seed, frame id), so the output
// is byte-identical regardless of processing order or platform.
inline std::size_t perturb(const std::filesystem::path& gt_dir,
                           const std::filesystem::path& out_dir, const PerturbConfig& config) {
    config.validate();
    const std::vector<FrameFile> frames = list_frame_files(gt_dir);
    const std::vector<AnchorShape> pool = collect_shape_pool(gt_dir);
    std::filesystem::create_directories(out_dir);
    std::size_t written = 0;
    for (const FrameFile& frame : frames) {
        const std::vector<GroundTruthObject> gts = read_label_file(frame.path);
        SplitMix64 rng(config.seed ^ fnv1a64(frame.frame_id));
        const std::vector<Detection> dets = perturb_frame(gts, pool, config, rng);
        write_result_file(out_dir / (frame.frame_id + ".txt"), dets);
        written += dets.size();
    }
    return written;
}

}  // namespace anchorlab
