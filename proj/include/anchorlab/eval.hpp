#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anchorlab/box.hpp"
#include "anchorlab/kitti.hpp"
#include "anchorlab/parallel.hpp"

namespace anchorlab {

/*----------------------------------------------------------------------
  KITTI-protocol matching and average precision.

  Evaluating difficulty bin D counts every ground-truth object of the
  evaluated class whose difficulty is D or easier as a positive; objects of
  strictly harder bins (and too-small "Ignored" objects, and DontCare
  regions) are ignored: detections landing on them are neither true nor
  false positives.
----------------------------------------------------------------------*/

enum class Interpolation { R11, R40 };

struct MatchConfig {
    double iou_threshold = 0.7;  // cars require IoU >= 0.7
    std::string class_name = "Car";
    DifficultyBin difficulty = DifficultyBin::Moderate;
    Interpolation interpolation = Interpolation::R11;
};

enum class DetectionFlag {
    TruePositive,
    FalsePositive,
    IgnoredMatch,  // best match was an ignored object or DontCare region
    NotEvaluated,  // detection of a different class
};

struct MatchResult {
    std::vector<DetectionFlag> det_flags;  // parallel to the input detections
    std::vector<bool> gt_matched;          // parallel to the input ground truth
    std::size_t counted_gt = 0;            // positives contributed by this image
};

// Greedy matching in descending score order (ties keep input order). Each
// detection takes the unmatched counted ground-truth box with the highest
// IoU at or above the threshold. A detection without such a partner is
// absorbed by an unmatched ignored object or a DontCare region when one
// overlaps enough; ignored objects absorb at most one detection, DontCare
// regions any number.
inline MatchResult match_image(std::span<const Detection> dets,
                               std::span<const GroundTruthObject> gts, const MatchConfig& config) {
    if (config.iou_threshold <= 0.0 || config.iou_threshold > 1.0) {
        throw std::invalid_argument("match_image: iou_threshold must lie in (0,1]");
    }
    const int level = static_cast<int>(config.difficulty);

    enum class GtKind { Counted, IgnoredObject, DontCare, OtherClass };
    std::vector<GtKind> gt_kind(gts.size());
    MatchResult result;
    result.gt_matched.assign(gts.size(), false);
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].dont_care()) {
            gt_kind[g] = GtKind::DontCare;
        } else if (gts[g].class_name != config.class_name) {
            gt_kind[g] = GtKind::OtherClass;
        } else if (static_cast<int>(classify_difficulty(gts[g])) <= level) {
            gt_kind[g] = GtKind::Counted;
            ++result.counted_gt;
        } else {
            gt_kind[g] = GtKind::IgnoredObject;
        }
    }

    std::vector<std::size_t> order;
    order.reserve(dets.size());
    for (std::size_t d = 0; d < dets.size(); ++d) order.push_back(d);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    result.det_flags.assign(dets.size(), DetectionFlag::NotEvaluated);
    for (std::size_t d : order) {
        if (dets[d].class_name != config.class_name) continue;
        const Box2D& box = dets[d].bbox;

        std::size_t best_gt = gts.size();
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_kind[g] != GtKind::Counted || result.gt_matched[g]) continue;
            const double overlap = iou(box, gts[g].bbox);
            if (overlap >= config.iou_threshold && overlap > best_iou) {
                best_iou = overlap;
                best_gt = g;
            }
        }
        if (best_gt < gts.size()) {
            result.gt_matched[best_gt] = true;
            result.det_flags[d] = DetectionFlag::TruePositive;
            continue;
        }

        best_gt = gts.size();
        best_iou = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_kind[g] != GtKind::IgnoredObject || result.gt_matched[g]) continue;
            const double overlap = iou(box, gts[g].bbox);
            if (overlap >= config.iou_threshold && overlap > best_iou) {
                best_iou = overlap;
                best_gt = g;
            }
        }
        if (best_gt < gts.size()) {
            result.gt_matched[best_gt] = true;
            result.det_flags[d] = DetectionFlag::IgnoredMatch;
            continue;
        }

        bool absorbed = false;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_kind[g] != GtKind::DontCare) continue;
            if (iou(box, gts[g].bbox) >= config.iou_threshold) {
                result.gt_matched[g] = true;
                absorbed = true;
                break;
            }
        }
        result.det_flags[d] = absorbed ? DetectionFlag::IgnoredMatch : DetectionFlag::FalsePositive;
    }
    return result;
}

/*----------------------------------------------------------------------
  Precision-recall curves and interpolated AP.
----------------------------------------------------------------------*/

// one matched detection: its confidence and whether it was a true positive
struct ScoredOutcome {
    double score = 0.0;
    bool is_tp = false;
};

struct PRPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

struct PRCurve {
    std::vector<PRPoint> points;  // one per distinct score, descending threshold
    std::size_t positives = 0;
};

// Sweep the score threshold over all distinct detection scores, descending.
// With zero positives the curve keeps recall at 0 (AP is then 0 by
// definition).
inline PRCurve pr_curve(std::vector<ScoredOutcome> outcomes, std::size_t positives) {
    std::sort(outcomes.begin(), outcomes.end(),
              [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.score > b.score; });
    PRCurve curve;
    curve.positives = positives;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t i = 0;
    while (i < outcomes.size()) {
        const double threshold = outcomes[i].score;
        while (i < outcomes.size() && outcomes[i].score == threshold) {
            if (outcomes[i].is_tp) {
                ++tp;
            } else {
                ++fp;
            }
            ++i;
        }
        PRPoint point;
        point.threshold = threshold;
        point.recall = positives > 0 ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
        point.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        curve.points.push_back(point);
    }
    return curve;
}

// Interpolated precision p(r) = max precision at recall >= r, averaged over
// fixed recall samples: 11 points {0, 0.1, ..., 1.0} or 40 points
// {1/40, ..., 1.0}.
inline double average_precision(const PRCurve& curve, Interpolation interpolation) {
    if (curve.positives == 0 || curve.points.empty()) return 0.0;
    const int samples = interpolation == Interpolation::R11 ? 11 : 40;
    const int first = interpolation == Interpolation::R11 ? 0 : 1;
    const double denom = interpolation == Interpolation::R11 ? 10.0 : 40.0;
    double total = 0.0;
    for (int k = first; k < first + samples; ++k) {
        const double r = static_cast<double>(k) / denom;
        double best = 0.0;
        for (const PRPoint& p : curve.points) {
            if (p.recall >= r) best = std::max(best, p.precision);
        }
        total += best;
    }
    return total / samples;
}

/*----------------------------------------------------------------------
  Whole-dataset evaluation.
----------------------------------------------------------------------*/

struct BinReport {
    DifficultyBin difficulty = DifficultyBin::Easy;
    double ap = 0.0;
    std::size_t gt = 0;       // positives (recall denominator)
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t ignored = 0;  // detections absorbed by ignored objects/regions
    PRCurve curve;
};

struct APReport {
    std::string class_name;
    double iou_threshold = 0.7;
    Interpolation interpolation = Interpolation::R11;
    BinReport easy;
    BinReport moderate;
    BinReport hard;
    std::vector<std::string> warnings;

    const BinReport& bin(DifficultyBin d) const {
        switch (d) {
            case DifficultyBin::Easy: return easy;
            case DifficultyBin::Moderate: return moderate;
            default: return hard;
        }
    }
};

// Evaluates every frame of gt_dir against the same-named files of det_dir.
// A missing detection file counts as zero detections for that frame and is
// reported as a warning; a malformed file is an error. Frames may be
// processed by several threads; aggregation is sequential in frame order so
// the report is identical for any thread count.
inline APReport evaluate_dataset(const std::filesystem::path& det_dir,
                                 const std::filesystem::path& gt_dir,
                                 const std::string& class_name, double iou_threshold = 0.7,
                                 Interpolation interpolation = Interpolation::R11,
                                 int threads = 1) {
    const std::vector<FrameFile> frames = list_frame_files(gt_dir);
    if (!std::filesystem::is_directory(det_dir)) {
        throw std::runtime_error("not a directory: " + det_dir.string());
    }

    struct FrameOutcome {
        bool det_file_missing = false;
        // per difficulty bin
        std::array<std::vector<ScoredOutcome>, 3> outcomes;
        std::array<std::size_t, 3> positives{0, 0, 0};
        std::array<std::size_t, 3> ignored{0, 0, 0};
    };
    std::vector<FrameOutcome> per_frame(frames.size());

    parallel_for(frames.size(), threads, [&](std::size_t f) {
        const std::vector<GroundTruthObject> gts = read_label_file(frames[f].path);
        std::vector<Detection> dets;
        const std::filesystem::path det_path = det_dir / (frames[f].frame_id + ".txt");
        if (std::filesystem::exists(det_path)) {
            dets = read_result_file(det_path);
        } else {
            per_frame[f].det_file_missing = true;
        }
        for (int level = 0; level < 3; ++level) {
            MatchConfig config;
            config.iou_threshold = iou_threshold;
            config.class_name = class_name;
            config.difficulty = static_cast<DifficultyBin>(level);
            config.interpolation = interpolation;
            const MatchResult match = match_image(dets, gts, config);
            auto& out = per_frame[f];
            out.positives[level] = match.counted_gt;
            for (std::size_t d = 0; d < dets.size(); ++d) {
                switch (match.det_flags[d]) {
                    case DetectionFlag::TruePositive:
                        out.outcomes[level].push_back({dets[d].score, true});
                        break;
                    case DetectionFlag::FalsePositive:
                        out.outcomes[level].push_back({dets[d].score, false});
                        break;
                    case DetectionFlag::IgnoredMatch:
                        ++out.ignored[level];
                        break;
                    case DetectionFlag::NotEvaluated:
                        break;
                }
            }
        }
    });

    APReport report;
    report.class_name = class_name;
    report.iou_threshold = iou_threshold;
    report.interpolation = interpolation;
    for (int level = 0; level < 3; ++level) {
        std::vector<ScoredOutcome> outcomes;
        std::size_t positives = 0;
        std::size_t ignored = 0;
        for (std::size_t f = 0; f < frames.size(); ++f) {
            const FrameOutcome& out = per_frame[f];
            outcomes.insert(outcomes.end(), out.outcomes[level].begin(), out.outcomes[level].end());
            positives += out.positives[level];
            ignored += out.ignored[level];
        }
        BinReport bin;
        bin.difficulty = static_cast<DifficultyBin>(level);
        bin.gt = positives;
        bin.ignored = ignored;
        for (const ScoredOutcome& o : outcomes) {
            if (o.is_tp) {
                ++bin.tp;
            } else {
                ++bin.fp;
            }
        }
        bin.curve = pr_curve(std::move(outcomes), positives);
        bin.ap = average_precision(bin.curve, interpolation);
        switch (static_cast<DifficultyBin>(level)) {
            case DifficultyBin::Easy: report.easy = std::move(bin); break;
            case DifficultyBin::Moderate: report.moderate = std::move(bin); break;
            default: report.hard = std::move(bin); break;
        }
    }
    for (std::size_t f = 0; f < frames.size(); ++f) {
        if (per_frame[f].det_file_missing) {
            report.warnings.push_back("missing detection file for frame " + frames[f].frame_id +
                                      ", assuming zero detections");
        }
    }
    return report;
}

}  // namespace anchorlab
