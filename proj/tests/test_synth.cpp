#include "anchorlab/synth.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "anchorlab/eval.hpp"
#include "fixtures.hpp"

using namespace anchorlab;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string slurp_dir(const std::filesystem::path& dir) {
    std::string all;
    for (const auto& frame : list_frame_files(dir)) {
        all += frame.frame_id;
        all += '\n';
        all += slurp(frame.path);
    }
    return all;
}

}  // namespace

TEST(Synth, ZeroNoiseReproducesGroundTruthPerfectly) {
    testfx::TempDir tmp("synth_zero");
    const auto gt = tmp.sub("gt");
    testfx::write_standard_fixture(gt);
    const auto det = tmp.path() / "det";
    PerturbConfig config;
    config.seed = 42;
    perturb(gt, det, config);
    const auto report = evaluate_dataset(det, gt, "Car");
    EXPECT_DOUBLE_EQ(report.easy.ap, 1.0);
    EXPECT_DOUBLE_EQ(report.moderate.ap, 1.0);
    EXPECT_DOUBLE_EQ(report.hard.ap, 1.0);
    EXPECT_EQ(report.hard.fp, 0u);
}

TEST(Synth, DropEverythingGivesZeroAp) {
    testfx::TempDir tmp("synth_drop");
    const auto gt = tmp.sub("gt");
    testfx::write_standard_fixture(gt);
    const auto det = tmp.path() / "det";
    PerturbConfig config;
    config.drop_rate = 1.0;
    config.seed = 42;
    perturb(gt, det, config);
    const auto report = evaluate_dataset(det, gt, "Car");
    EXPECT_DOUBLE_EQ(report.easy.ap, 0.0);
    EXPECT_DOUBLE_EQ(report.moderate.ap, 0.0);
    EXPECT_DOUBLE_EQ(report.hard.ap, 0.0);
}

TEST(Synth, DeterministicByteForByteAcrossRuns) {
    testfx::TempDir tmp("synth_det");
    const auto gt = tmp.sub("gt");
    testfx::write_standard_fixture(gt);
    PerturbConfig config;
    config.center_noise_sigma = 4.0;
    config.scale_noise_sigma = 0.1;
    config.drop_rate = 0.2;
    config.false_positive_rate = 1.5;
    config.seed = 777;
    const auto det_a = tmp.path() / "det_a";
    const auto det_b = tmp.path() / "det_b";
    perturb(gt, det_a, config);
    perturb(gt, det_b, config);
    EXPECT_EQ(slurp_dir(det_a), slurp_dir(det_b));
    EXPECT_FALSE(slurp_dir(det_a).empty());
}

TEST(Synth, SeedChangesOutput) {
    testfx::TempDir tmp("synth_seed");
    const auto gt = tmp.sub("gt");
    testfx::write_standard_fixture(gt);
    PerturbConfig config;
    config.center_noise_sigma = 4.0;
    config.seed = 1;
    const auto det_a = tmp.path() / "det_a";
    const auto det_b = tmp.path() / "det_b";
    perturb(gt, det_a, config);
    config.seed = 2;
    perturb(gt, det_b, config);
    EXPECT_NE(slurp_dir(det_a), slurp_dir(det_b));
}

TEST(Synth, HugeCenterNoiseDestroysAp) {
    // sigma far beyond any box size; regression bound fixed after measuring
    testfx::TempDir tmp("synth_noise");
    const auto gt = tmp.sub("gt");
    testfx::write_standard_fixture(gt);
    const auto det = tmp.path() / "det";
    PerturbConfig config;
    config.center_noise_sigma = 500.0;
    config.seed = 9;
    perturb(gt, det, config);
    const auto report = evaluate_dataset(det, gt, "Car");
    EXPECT_LT(report.moderate.ap, 0.05);
}

TEST(Synth, IncreasingNoiseGridIsMonotoneInModerateAp) {
    testfx::TempDir tmp("synth_grid");
    const auto gt = tmp.sub("gt");
    testfx::write_standard_fixture(gt);
    double previous = 1.1;
    int step = 0;
    for (double sigma : {0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
        PerturbConfig config;
        config.center_noise_sigma = sigma;
        config.seed = 31337;
        const auto det = tmp.path() / ("det_" + std::to_string(step++));
        perturb(gt, det, config);
        const auto report = evaluate_dataset(det, gt, "Car");
        // allow single-step inversions up to 0.01 AP from sampling noise
        EXPECT_LE(report.moderate.ap, previous + 0.01) << "sigma " << sigma;
        previous = report.moderate.ap;
    }
    EXPECT_LT(previous, 0.9);  // the grid must actually degrade
}

TEST(Synth, FalsePositivesAppearAtRequestedRate) {
    testfx::TempDir tmp("synth_fp");
    const auto gt = tmp.sub("gt");
    testfx::write_standard_fixture(gt);
    const auto det = tmp.path() / "det";
    PerturbConfig config;
    config.false_positive_rate = 3.0;
    config.seed = 5;
    const std::size_t written = perturb(gt, det, config);
    // 100 true boxes + Poisson(3) per frame over 10 frames
    EXPECT_GT(written, 110u);
    EXPECT_LT(written, 170u);
    const auto report = evaluate_dataset(det, gt, "Car");
    EXPECT_GT(report.hard.fp, 0u);
}

TEST(Synth, RandomScoreModelStillEvaluates) {
    testfx::TempDir tmp("synth_rand");
    const auto gt = tmp.sub("gt");
    testfx::write_standard_fixture(gt);
    const auto det = tmp.path() / "det";
    PerturbConfig config;
    config.score_model = ScoreModel::Random;
    config.seed = 11;
    perturb(gt, det, config);
    const auto report = evaluate_dataset(det, gt, "Car");
    // zero spatial noise: every detection still overlaps perfectly
    EXPECT_DOUBLE_EQ(report.hard.ap, 1.0);
}

TEST(Synth, ConfigValidation) {
    PerturbConfig config;
    config.drop_rate = 1.5;
    EXPECT_THROW(config.validate(), std::invalid_argument);
    config = {};
    config.center_noise_sigma = -1.0;
    EXPECT_THROW(config.validate(), std::invalid_argument);
    config = {};
    config.false_positive_rate = -0.5;
    EXPECT_THROW(config.validate(), std::invalid_argument);
}
