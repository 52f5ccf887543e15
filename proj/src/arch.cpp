#include "mvfuse/arch.hpp"

#include "mvfuse/error.hpp"

namespace mvfuse {

namespace {

constexpr std::size_t kTotalDownsampling = 16;

ConvOp conv(std::size_t kernel, std::size_t channels, std::size_t stride = 1)
{
    return {OpKind::Conv, kernel, channels, stride, false};
}

LayerSpec resblock(const std::string& name, std::size_t out_channels, std::size_t divisor)
{
    return {name, {conv(1, 64), conv(3, 64), conv(1, out_channels)}, 3, divisor, true};
}

LayerSpec strided(const std::string& name, std::size_t channels, std::size_t divisor)
{
    return {name, {conv(1, channels), conv(3, channels, 2)}, 1, divisor, false};
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

} // namespace

ArchSpec ArchSpec::downsampling()
{
    ArchSpec arch;
    arch.layers = {
        {"initialize",
         {conv(3, 32, 2), {OpKind::MaxPool, 5, 0, 2, true}, conv(1, 32)},
         1, 2, false},
        resblock("resblock 1", 64, 2),
        strided("conv 1", 64, 4),
        resblock("resblock 2", 128, 4),
        strided("conv 2", 128, 8),
        resblock("resblock 3", 256, 8),
        strided("conv 3", 256, 16),
        resblock("resblock 4", 256, 16),
    };
    return arch;
}

ShapeReport shape_check(const ArchSpec& arch, std::size_t height, std::size_t width)
{
    if (height == 0 || width == 0 || height % kTotalDownsampling != 0 || width % kTotalDownsampling != 0)
        fail(ErrorCode::IndivisibleInput, "input " + std::to_string(height) + "x" + std::to_string(width) +
                                              " is not divisible by " + std::to_string(kTotalDownsampling));

    ShapeReport report;
    std::size_t h = height, w = width, c = arch.input_channels;
    for (const LayerSpec& layer : arch.layers) {
        for (std::size_t r = 0; r < layer.repeat; ++r) {
            std::size_t in_h = h, in_w = w, in_c = c;
            for (const ConvOp& op : layer.ops) {
                // A parallel op reads the input of the op before it.
                const std::size_t src_h = op.parallel ? in_h : h;
                const std::size_t src_w = op.parallel ? in_w : w;
                const std::size_t src_c = op.parallel ? in_c : c;
                const std::size_t out_h = ceil_div(src_h, op.stride);
                const std::size_t out_w = ceil_div(src_w, op.stride);
                const std::size_t out_c = op.kind == OpKind::MaxPool ? src_c : op.channels;
                if (op.parallel) {
                    if (out_h != h || out_w != w)
                        fail(ErrorCode::InvalidConfig, layer.name + ": parallel branches disagree in size");
                    c += out_c;
                } else {
                    in_h = h;
                    in_w = w;
                    in_c = c;
                    h = out_h;
                    w = out_w;
                    c = out_c;
                }
            }
        }
        if (h != height / layer.output_divisor || w != width / layer.output_divisor)
            fail(ErrorCode::InvalidConfig, layer.name + " produced " + std::to_string(h) + "x" +
                                               std::to_string(w) + ", expected input / " +
                                               std::to_string(layer.output_divisor));
        const LayerShape shape{layer.name, h, w, c};
        report.layers.push_back(shape);
        if (layer.stage) {
            report.stages.push_back(shape);
            report.heads.push_back({layer.name + " logits", height, width, arch.n_classes});
        }
    }
    return report;
}

} // namespace mvfuse
