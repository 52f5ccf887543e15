#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mvfuse {

enum class OpKind { Conv, MaxPool };

struct ConvOp {
    OpKind kind = OpKind::Conv;
    std::size_t kernel = 1;
    std::size_t channels = 0;  // ignored for pooling, which keeps its input channels
    std::size_t stride = 1;
    /// Runs on the same input as the previous op; the two outputs are concatenated.
    bool parallel = false;
};

struct LayerSpec {
    std::string name;
    std::vector<ConvOp> ops;
    std::size_t repeat = 1;
    /// Expected output size as input / divisor in both spatial dimensions.
    std::size_t output_divisor = 1;
    /// Output feeds a logit head and takes part in stage supervision.
    bool stage = false;
};

struct ArchSpec {
    std::size_t input_channels = 4;
    std::size_t n_classes = 5;
    std::vector<LayerSpec> layers;

    /// Downsampling path shared by the FCN and UNET backbones: an initialization block, then
    /// four residual stages separated by strided conv layers.
    static ArchSpec downsampling();
};

struct LayerShape {
    std::string name;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
};

struct ShapeReport {
    std::vector<LayerShape> layers;
    std::vector<LayerShape> stages;
    /// Per-stage logit heads after bilinear resize back to the input size.
    std::vector<LayerShape> heads;
};

/// Propagates an H x W input through `arch` with "same" padding. Throws IndivisibleInput when
/// H or W is not a multiple of 16 and InvalidConfig if a layer misses its declared size.
ShapeReport shape_check(const ArchSpec& arch, std::size_t height, std::size_t width);

} // namespace mvfuse
