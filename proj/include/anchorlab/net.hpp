#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "anchorlab/box.hpp"

namespace anchorlab {

/*----------------------------------------------------------------------
  Declarative CNN layer arithmetic. Only the geometry of the network is
  modeled (activation dimensions, strides, memory) -- no weights.
----------------------------------------------------------------------*/

enum class LayerKind { Conv, Pool };

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    int kernel = 1;
    int stride = 1;
    int padding = 0;
    int output_channels = 1;
};

struct NetSpec {
    std::string name;
    std::vector<LayerSpec> layers;
};

// Canonical layer lists whose derived dimensions reproduce the classic
// chains: VGG16 maps 224x224 to 14x14 at conv5_3 and 7x7 at pool5; AlexNet
// maps 227x227 to 55x55 at conv1 and 6x6 at pool5.
inline NetSpec builtin_net(std::string_view name) {
    auto conv = [](const char* n, int channels) {
        return LayerSpec{n, LayerKind::Conv, 3, 1, 1, channels};
    };
    if (name == "vgg16") {
        NetSpec net{"vgg16", {}};
        auto pool = [](const char* n, int channels) {
            return LayerSpec{n, LayerKind::Pool, 2, 2, 0, channels};
        };
        net.layers = {
            conv("conv1_1", 64),  conv("conv1_2", 64),  pool("pool1", 64),
            conv("conv2_1", 128), conv("conv2_2", 128), pool("pool2", 128),
            conv("conv3_1", 256), conv("conv3_2", 256), conv("conv3_3", 256), pool("pool3", 256),
            conv("conv4_1", 512), conv("conv4_2", 512), conv("conv4_3", 512), pool("pool4", 512),
            conv("conv5_1", 512), conv("conv5_2", 512), conv("conv5_3", 512), pool("pool5", 512),
        };
        return net;
    }
    if (name == "alexnet") {
        NetSpec net{"alexnet", {}};
        auto pool = [](const char* n, int channels) {
            return LayerSpec{n, LayerKind::Pool, 3, 2, 0, channels};
        };
        net.layers = {
            LayerSpec{"conv1", LayerKind::Conv, 11, 4, 0, 96},
            pool("pool1", 96),
            LayerSpec{"conv2", LayerKind::Conv, 5, 1, 2, 256},
            pool("pool2", 256),
            conv("conv3", 384),
            conv("conv4", 384),
            conv("conv5", 256),
            pool("pool5", 256),
        };
        return net;
    }
    throw std::invalid_argument("builtin_net: unknown network '" + std::string(name) + "'");
}

struct LayerDims {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    int width = 0;
    int height = 0;
    int channels = 0;
    std::int64_t cumulative_stride = 1;
    std::int64_t elements = 0;  // width * height * channels

    std::int64_t bytes(int bytes_per_element = 4) const { return elements * bytes_per_element; }
};

struct LayerReport {
    std::vector<LayerDims> layers;

    const LayerDims& at(std::string_view layer_name) const {
        for (const LayerDims& l : layers) {
            if (l.name == layer_name) return l;
        }
        throw std::invalid_argument("layer not found: " + std::string(layer_name));
    }
};

namespace detail {

inline void validate_net(const NetSpec& net) {
    if (net.layers.empty()) throw std::invalid_argument("net '" + net.name + "' has no layers");
    std::unordered_set<std::string_view> names;
    for (const LayerSpec& l : net.layers) {
        if (l.kernel < 1 || l.stride < 1 || l.padding < 0 || l.output_channels < 1) {
            throw std::invalid_argument("invalid layer parameters in '" + l.name + "'");
        }
        if (!names.insert(l.name).second) {
            throw std::invalid_argument("duplicate layer name '" + l.name + "'");
        }
    }
}

// conv: floor((in + 2*pad - kernel)/stride) + 1
// pool: ceil mode, matching Caffe-era frameworks -- required to reproduce
//       the 224 -> 14 -> 7 chain together with odd intermediate sizes
inline int layer_out_dim(const LayerSpec& l, int in) {
    const int span = in + 2 * l.padding - l.kernel;
    if (l.kind == LayerKind::Conv) {
        if (span < 0) return 0;
        return span / l.stride + 1;
    }
    if (span <= 0) return 1;
    return (span + l.stride - 1) / l.stride + 1;
}

}  // namespace detail

// Per-layer activation dimensions via standard convolution arithmetic.
inline LayerReport layer_dims(const NetSpec& net, int input_w, int input_h) {
    detail::validate_net(net);
    if (input_w < 1 || input_h < 1) {
        throw std::invalid_argument("layer_dims: input dimensions must be >= 1");
    }
    LayerReport report;
    int w = input_w;
    int h = input_h;
    std::int64_t stride = 1;
    for (const LayerSpec& l : net.layers) {
        w = detail::layer_out_dim(l, w);
        h = detail::layer_out_dim(l, h);
        if (w < 1 || h < 1) {
            throw std::invalid_argument("layer '" + l.name + "' reduces dimensions below 1x1");
        }
        stride *= l.stride;
        LayerDims dims;
        dims.name = l.name;
        dims.kind = l.kind;
        dims.width = w;
        dims.height = h;
        dims.channels = l.output_channels;
        dims.cumulative_stride = stride;
        dims.elements = static_cast<std::int64_t>(w) * h * l.output_channels;
        report.layers.push_back(std::move(dims));
    }
    return report;
}

// Cumulative downsampling factor between input pixels and the named layer's
// cells; independent of the input size.
inline std::int64_t feature_stride(const NetSpec& net, std::string_view layer_name) {
    detail::validate_net(net);
    std::int64_t stride = 1;
    for (const LayerSpec& l : net.layers) {
        stride *= l.stride;
        if (l.name == layer_name) return stride;
    }
    throw std::invalid_argument("feature_stride: unknown layer '" + std::string(layer_name) + "'");
}

// ROI pooling window sizes used by the study: pooling from conv5_3 keeps the
// stock 7x7 window, pooling from the higher-resolution conv4_3 enlarges it
// to 13x13, and AlexNet's conv5 uses its native pool5 output 6x6.
inline std::pair<int, int> roi_pool_window(const NetSpec& net, std::string_view layer_name) {
    if (net.name == "vgg16") {
        if (layer_name == "conv5_3") return {7, 7};
        if (layer_name == "conv4_3") return {13, 13};
    } else if (net.name == "alexnet") {
        if (layer_name == "conv5") return {6, 6};
    }
    throw std::invalid_argument("roi_pool_window: no window defined for " + net.name + "/" +
                                std::string(layer_name));
}

// Dense value grid with `channels` planes of width x height cells.
struct FeatureGrid {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    FeatureGrid() = default;
    FeatureGrid(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {
        if (w < 1 || h < 1 || c < 1) throw std::invalid_argument("FeatureGrid: bad dimensions");
    }

    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

// Max-pool an image-coordinate region into a fixed output size so that
// fully-connected layers can consume it. The region is projected onto the
// grid by dividing by the feature stride, split into output_w x output_h
// bins with floor/ceil edges, and each output cell takes the per-channel
// max over its bin. Bins without cells yield 0.
inline FeatureGrid roi_pool(const FeatureGrid& grid, const Box2D& roi, double stride, int output_w,
                            int output_h) {
    if (output_w < 1 || output_h < 1) {
        throw std::invalid_argument("roi_pool: output dimensions must be >= 1");
    }
    if (stride <= 0.0) throw std::invalid_argument("roi_pool: stride must be positive");

    const double fx1 = roi.left / stride;
    const double fy1 = roi.top / stride;
    const double fx2 = roi.right / stride;
    const double fy2 = roi.bottom / stride;
    if (fx2 <= fx1 || fy2 <= fy1) {
        throw std::invalid_argument("roi_pool: roi has no area after projection");
    }
    if (fx2 <= 0.0 || fy2 <= 0.0 || fx1 >= grid.width || fy1 >= grid.height) {
        throw std::invalid_argument("roi_pool: roi lies outside the feature grid");
    }

    const int x0 = std::max(0, static_cast<int>(std::floor(fx1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(fy1)));
    const int x1 = std::min(grid.width, static_cast<int>(std::ceil(fx2)));
    const int y1 = std::min(grid.height, static_cast<int>(std::ceil(fy2)));
    const int roi_w = x1 - x0;
    const int roi_h = y1 - y0;

    FeatureGrid out(output_w, output_h, grid.channels, 0.0);
    for (int by = 0; by < output_h; ++by) {
        const int cell_y0 = y0 + (by * roi_h) / output_h;
        const int cell_y1 = y0 + (((by + 1) * roi_h) + output_h - 1) / output_h;
        for (int bx = 0; bx < output_w; ++bx) {
            const int cell_x0 = x0 + (bx * roi_w) / output_w;
            const int cell_x1 = x0 + (((bx + 1) * roi_w) + output_w - 1) / output_w;
            for (int c = 0; c < grid.channels; ++c) {
                double value = 0.0;
                bool any = false;
                for (int y = cell_y0; y < cell_y1; ++y) {
                    for (int x = cell_x0; x < cell_x1; ++x) {
                        const double v = grid.at(x, y, c);
                        value = any ? std::max(value, v) : v;
                        any = true;
                    }
                }
                out.at(bx, by, c) = any ? value : 0.0;
            }
        }
    }
    return out;
}

/*----------------------------------------------------------------------
  Input resizing and activation-memory estimation.
----------------------------------------------------------------------*/

// resize policies: fix the long image side to a pixel count (the detector
// codebase default, 1000 px) or apply an explicit scale factor
struct LongSide {
    int pixels = 1000;
};
struct ScaleBy {
    double factor = 1.0;
};
using ResizePolicy = std::variant<LongSide, ScaleBy>;

struct ResizeResult {
    int width = 0;
    int height = 0;
    double scale = 1.0;  // multiply original coordinates by this to reach network coordinates
};

inline ResizeResult resize_for_input(int width, int height, const ResizePolicy& policy) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("resize_for_input: dimensions must be positive");
    }
    double scale = 1.0;
    if (const auto* long_side = std::get_if<LongSide>(&policy)) {
        if (long_side->pixels < 1) throw std::invalid_argument("resize_for_input: bad long side");
        scale = static_cast<double>(long_side->pixels) / std::max(width, height);
    } else {
        scale = std::get<ScaleBy>(policy).factor;
        if (scale <= 0.0) throw std::invalid_argument("resize_for_input: scale must be positive");
    }
    ResizeResult out;
    out.width = std::max(1, static_cast<int>(std::llround(width * scale)));
    out.height = std::max(1, static_cast<int>(std::llround(height * scale)));
    out.scale = scale;
    return out;
}

// Activation memory of all layers up to and including `up_to_layer`:
// sum of element counts times bytes per element, times a training
// multiplier that models storing gradients next to activations. This is an
// estimate of the dominant term, not a framework measurement: weights and
// workspace are excluded.
inline double estimate_activation_memory(const NetSpec& net, std::string_view up_to_layer,
                                         int input_w, int input_h, int bytes_per_element = 4,
                                         double training_multiplier = 2.0) {
    if (bytes_per_element < 1) {
        throw std::invalid_argument("estimate_activation_memory: bytes_per_element must be >= 1");
    }
    if (training_multiplier < 0.0) {
        throw std::invalid_argument("estimate_activation_memory: negative training multiplier");
    }
    const LayerReport report = layer_dims(net, input_w, input_h);
    std::int64_t elements = 0;
    bool found = false;
    for (const LayerDims& l : report.layers) {
        elements += l.elements;
        if (l.name == up_to_layer) {
            found = true;
            break;
        }
    }
    if (!found) {
        throw std::invalid_argument("estimate_activation_memory: unknown layer '" +
                                    std::string(up_to_layer) + "'");
    }
    return static_cast<double>(elements) * bytes_per_element * training_multiplier;
}

}  // namespace anchorlab
