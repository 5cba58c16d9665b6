#include "anchorlab/net.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>

#include "anchorlab/rng.hpp"

using namespace anchorlab;

TEST(BuiltinNets, Vgg16HasThirteenConvsAndFivePools) {
    const NetSpec net = builtin_net("vgg16");
    const auto convs = std::count_if(net.layers.begin(), net.layers.end(),
                                     [](const LayerSpec& l) { return l.kind == LayerKind::Conv; });
    EXPECT_EQ(convs, 13);
    EXPECT_EQ(static_cast<int>(net.layers.size()) - convs, 5);
    for (const LayerSpec& l : net.layers) {
        EXPECT_EQ(l.stride, l.kind == LayerKind::Conv ? 1 : 2) << l.name;
    }
}

TEST(BuiltinNets, AlexNetHasFiveConvsAndThreePools) {
    const NetSpec net = builtin_net("alexnet");
    const auto convs = std::count_if(net.layers.begin(), net.layers.end(),
                                     [](const LayerSpec& l) { return l.kind == LayerKind::Conv; });
    EXPECT_EQ(convs, 5);
    EXPECT_EQ(static_cast<int>(net.layers.size()) - convs, 3);
    EXPECT_EQ(net.layers.front().stride, 4);  // aggressive conv1 downsampling
}

TEST(BuiltinNets, UnknownNameFails) {
    EXPECT_THROW(builtin_net("resnet50"), std::invalid_argument);
}

TEST(LayerDims, Vgg16ClassificationChain) {
    const auto report = layer_dims(builtin_net("vgg16"), 224, 224);
    EXPECT_EQ(report.at("conv5_3").width, 14);
    EXPECT_EQ(report.at("conv5_3").height, 14);
    EXPECT_EQ(report.at("pool5").width, 7);
    EXPECT_EQ(report.at("pool5").height, 7);
    EXPECT_EQ(report.at("pool5").elements, 7 * 7 * 512);
    EXPECT_EQ(report.at("pool5").bytes(4), 7 * 7 * 512 * 4);
}

TEST(LayerDims, AlexNetClassificationChain) {
    const auto report = layer_dims(builtin_net("alexnet"), 227, 227);
    EXPECT_EQ(report.at("conv1").width, 55);
    EXPECT_EQ(report.at("conv1").height, 55);
    EXPECT_EQ(report.at("pool5").width, 6);
    EXPECT_EQ(report.at("pool5").height, 6);
}

TEST(LayerDims, UpsampledKittiChain) {
    const auto report = layer_dims(builtin_net("vgg16"), 2000, 604);
    EXPECT_EQ(report.at("conv5_3").width, 125);
    EXPECT_EQ(report.at("conv5_3").height, 38);  // needs ceil-mode pooling
}

TEST(LayerDims, TinyInputNamesTheFailingLayer) {
    try {
        layer_dims(builtin_net("alexnet"), 8, 8);
        FAIL() << "expected failure";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("conv1"), std::string::npos);
    }
}

TEST(LayerDims, CumulativeStrideIsProductOfStrides) {
    const auto report = layer_dims(builtin_net("vgg16"), 224, 224);
    EXPECT_EQ(report.at("conv1_1").cumulative_stride, 1);
    EXPECT_EQ(report.at("pool1").cumulative_stride, 2);
    EXPECT_EQ(report.at("conv4_3").cumulative_stride, 8);
    EXPECT_EQ(report.at("pool5").cumulative_stride, 32);
}

TEST(LayerDims, DoublingInputRoughlyDoublesEveryLayer) {
    const NetSpec net = builtin_net("vgg16");
    SplitMix64 rng(73);
    for (int round = 0; round < 20; ++round) {
        const int w = 120 + static_cast<int>(rng.next_below(800));
        const int h = 120 + static_cast<int>(rng.next_below(400));
        const auto base = layer_dims(net, w, h);
        const auto doubled = layer_dims(net, 2 * w, 2 * h);
        for (std::size_t i = 0; i < base.layers.size(); ++i) {
            EXPECT_LE(std::abs(doubled.layers[i].width - 2 * base.layers[i].width), 2);
            EXPECT_LE(std::abs(doubled.layers[i].height - 2 * base.layers[i].height), 2);
        }
    }
}

TEST(FeatureStride, PaperAnchors) {
    EXPECT_EQ(feature_stride(builtin_net("vgg16"), "conv5_3"), 16);
    EXPECT_EQ(feature_stride(builtin_net("vgg16"), "conv4_3"), 8);
    EXPECT_EQ(feature_stride(builtin_net("alexnet"), "conv5"), 16);
}

TEST(FeatureStride, UnknownLayerFails) {
    EXPECT_THROW(feature_stride(builtin_net("vgg16"), "conv9_9"), std::invalid_argument);
}

TEST(RoiPoolWindow, SupportedLayers) {
    const NetSpec vgg = builtin_net("vgg16");
    const NetSpec alex = builtin_net("alexnet");
    EXPECT_EQ(roi_pool_window(vgg, "conv5_3"), (std::pair{7, 7}));
    EXPECT_EQ(roi_pool_window(vgg, "conv4_3"), (std::pair{13, 13}));
    EXPECT_EQ(roi_pool_window(alex, "conv5"), (std::pair{6, 6}));
    EXPECT_THROW(roi_pool_window(vgg, "conv3_3"), std::invalid_argument);
}

TEST(RoiPool, WholeGridToSameSizeIsIdentity) {
    FeatureGrid grid(7, 7, 2);
    for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < 7; ++y) {
            for (int x = 0; x < 7; ++x) grid.at(x, y, c) = 100 * c + 10 * y + x;
        }
    }
    const Box2D roi{0, 0, 7 * 16.0, 7 * 16.0};
    const FeatureGrid out = roi_pool(grid, roi, 16.0, 7, 7);
    for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < 7; ++y) {
            for (int x = 0; x < 7; ++x) EXPECT_DOUBLE_EQ(out.at(x, y, c), grid.at(x, y, c));
        }
    }
}

TEST(RoiPool, ConstantGridStaysConstant) {
    FeatureGrid grid(9, 5, 3, 2.5);
    const FeatureGrid out = roi_pool(grid, {10, 3, 120, 70}, 16.0, 4, 4);
    for (double v : out.data) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(RoiPool, QuadrantMaxOracle) {
    FeatureGrid grid(4, 4, 1);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) grid.at(x, y, 0) = y * 4 + x;
    }
    const FeatureGrid out = roi_pool(grid, {0, 0, 4, 4}, 1.0, 2, 2);
    // brute-force max per 2x2 quadrant
    for (int by = 0; by < 2; ++by) {
        for (int bx = 0; bx < 2; ++bx) {
            double expected = 0.0;
            for (int y = 2 * by; y < 2 * by + 2; ++y) {
                for (int x = 2 * bx; x < 2 * bx + 2; ++x) {
                    expected = std::max(expected, grid.at(x, y, 0));
                }
            }
            EXPECT_DOUBLE_EQ(out.at(bx, by, 0), expected);
        }
    }
}

TEST(RoiPool, FullyOutsideRoiFails) {
    FeatureGrid grid(4, 4, 1);
    EXPECT_THROW(roi_pool(grid, {100, 100, 120, 120}, 1.0, 2, 2), std::invalid_argument);
    EXPECT_THROW(roi_pool(grid, {2, 2, 2, 3}, 1.0, 2, 2), std::invalid_argument);
}

TEST(RoiPool, MonotoneAndChannelEquivariant) {
    SplitMix64 rng(79);
    for (int round = 0; round < 50; ++round) {
        FeatureGrid grid(6, 6, 2);
        for (double& v : grid.data) v = rng.next_double();
        const Box2D roi{1.0 + rng.next_double() * 10.0, 1.0 + rng.next_double() * 10.0, 0, 0};
        Box2D r = roi;
        r.right = r.left + 5.0 + rng.next_double() * 60.0;
        r.bottom = r.top + 5.0 + rng.next_double() * 60.0;
        const FeatureGrid out = roi_pool(grid, r, 16.0, 3, 3);

        // monotone: raising one input never lowers any output
        FeatureGrid bumped = grid;
        const std::size_t idx = rng.next_below(bumped.data.size());
        bumped.data[idx] += 1.0;
        const FeatureGrid out2 = roi_pool(bumped, r, 16.0, 3, 3);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            EXPECT_GE(out2.data[i], out.data[i] - 1e-12);
        }

        // swapping channels swaps outputs
        FeatureGrid swapped(6, 6, 2);
        for (int y = 0; y < 6; ++y) {
            for (int x = 0; x < 6; ++x) {
                swapped.at(x, y, 0) = grid.at(x, y, 1);
                swapped.at(x, y, 1) = grid.at(x, y, 0);
            }
        }
        const FeatureGrid out3 = roi_pool(swapped, r, 16.0, 3, 3);
        for (int y = 0; y < 3; ++y) {
            for (int x = 0; x < 3; ++x) {
                EXPECT_DOUBLE_EQ(out3.at(x, y, 0), out.at(x, y, 1));
                EXPECT_DOUBLE_EQ(out3.at(x, y, 1), out.at(x, y, 0));
            }
        }
    }
}

TEST(Resize, KittiLongSidePolicies) {
    const auto r1000 = resize_for_input(1242, 375, LongSide{1000});
    EXPECT_EQ(r1000.width, 1000);
    EXPECT_EQ(r1000.height, 302);
    const auto r2000 = resize_for_input(1242, 375, LongSide{2000});
    EXPECT_EQ(r2000.width, 2000);
    EXPECT_EQ(r2000.height, 604);
    const auto r5000 = resize_for_input(1242, 375, LongSide{5000});
    EXPECT_EQ(r5000.width, 5000);
    EXPECT_EQ(r5000.height, 1510);
}

TEST(Resize, IdentityWhenAlreadyAtTarget) {
    const auto r = resize_for_input(1242, 375, LongSide{1242});
    EXPECT_EQ(r.width, 1242);
    EXPECT_EQ(r.height, 375);
    EXPECT_DOUBLE_EQ(r.scale, 1.0);
}

TEST(Resize, ExplicitScaleFactor) {
    const auto r = resize_for_input(1242, 375, ScaleBy{2.0});
    EXPECT_EQ(r.width, 2484);
    EXPECT_EQ(r.height, 750);
    EXPECT_DOUBLE_EQ(r.scale, 2.0);
}

TEST(Resize, PortraitOrientationPreserved) {
    const auto r = resize_for_input(375, 1242, LongSide{1000});
    EXPECT_EQ(r.width, 302);
    EXPECT_EQ(r.height, 1000);
}

TEST(Memory, FrozenOracleSums) {
    // confirmed beforehand with an independent per-layer spreadsheet script
    const NetSpec net = builtin_net("vgg16");
    EXPECT_DOUBLE_EQ(estimate_activation_memory(net, "conv4_3", 5000, 1510, 4, 2.0),
                     17643520000.0);
    EXPECT_DOUBLE_EQ(estimate_activation_memory(net, "conv4_3", 2000, 604, 4, 2.0), 2823680000.0);
}

TEST(Memory, HandSummedSmallCase) {
    // independent route: accumulate the documented dims table by hand
    // vgg16 @ 224x224, up to pool1: 224*224*64 twice, then 112*112*64
    const double expected = (224.0 * 224 * 64) * 2 + 112.0 * 112 * 64;
    EXPECT_DOUBLE_EQ(estimate_activation_memory(builtin_net("vgg16"), "pool1", 224, 224, 1, 1.0),
                     expected);
}

TEST(Memory, ZeroMultiplierGivesZero) {
    EXPECT_DOUBLE_EQ(estimate_activation_memory(builtin_net("vgg16"), "conv4_3", 224, 224, 4, 0.0),
                     0.0);
}

TEST(Memory, MonotoneInAreaAndDepth) {
    const NetSpec net = builtin_net("vgg16");
    EXPECT_LE(estimate_activation_memory(net, "conv4_3", 1000, 302),
              estimate_activation_memory(net, "conv4_3", 2000, 604));
    EXPECT_LE(estimate_activation_memory(net, "conv4_3", 2000, 604),
              estimate_activation_memory(net, "conv5_3", 2000, 604));
    EXPECT_LE(estimate_activation_memory(net, "conv1_1", 2000, 604),
              estimate_activation_memory(net, "pool5", 2000, 604));
}

TEST(NetSpecValidation, RejectsBadLayers) {
    NetSpec net{"custom", {{"a", LayerKind::Conv, 3, 1, 1, 8}, {"a", LayerKind::Conv, 3, 1, 1, 8}}};
    EXPECT_THROW(layer_dims(net, 100, 100), std::invalid_argument);  // duplicate names
    net.layers.clear();
    EXPECT_THROW(layer_dims(net, 100, 100), std::invalid_argument);  // empty
    net.layers = {{"a", LayerKind::Conv, 0, 1, 1, 8}};
    EXPECT_THROW(layer_dims(net, 100, 100), std::invalid_argument);  // kernel < 1
}
