#include "mvfuse/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "mvfuse/detail/byteio.hpp"
#include "mvfuse/loss.hpp"

namespace mvfuse {

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'V', 'T', 'S'};
constexpr std::uint32_t kCheckpointVersion = 1;

// Valid output range [lo, hi) for a kernel tap offset `d - r` along an axis of length `len`.
std::pair<std::size_t, std::size_t> tap_range(std::size_t d, std::size_t r, std::size_t len)
{
    const std::size_t lo = d < r ? r - d : 0;
    const std::size_t hi = d > r ? (len > d - r ? len - (d - r) : 0) : len;
    return {std::min(lo, len), hi};
}

} // namespace

ToySegmenter::ToySegmenter(std::size_t patch, std::size_t modalities, std::size_t n_classes)
    : patch_(patch), modalities_(modalities), n_classes_(n_classes),
      params_(patch * patch * modalities * n_classes + n_classes, 0.0)
{
    if (patch == 0 || patch % 2 == 0)
        fail(ErrorCode::InvalidConfig, "patch size must be odd, got " + std::to_string(patch));
    if (modalities == 0 || n_classes < 2)
        fail(ErrorCode::InvalidConfig, "segmenter needs >= 1 modality and >= 2 classes");
}

ToySegmenter ToySegmenter::random(std::size_t patch, std::size_t modalities, std::size_t n_classes,
                                  std::uint64_t seed, double stddev)
{
    ToySegmenter model(patch, modalities, n_classes);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    const std::size_t n_weights = model.params_.size() - n_classes;
    for (std::size_t i = 0; i < n_weights; ++i)
        model.params_[i] = normal(rng);
    return model;
}

double& ToySegmenter::weight(std::size_t cls, std::size_t modality, std::size_t dy, std::size_t dx) noexcept
{
    return params_[weight_index(cls, modality, dy, dx)];
}

double& ToySegmenter::bias(std::size_t cls) noexcept
{
    return params_[params_.size() - n_classes_ + cls];
}

void ToySegmenter::check_input(const Slice<float>& input) const
{
    if (input.channels != modalities_)
        fail(ErrorCode::DimMismatch, "slice has " + std::to_string(input.channels) +
                                         " channels, model expects " + std::to_string(modalities_));
}

Slice<double> ToySegmenter::logits(const Slice<float>& input) const
{
    check_input(input);
    const std::size_t height = input.height, width = input.width;
    const std::size_t r = patch_ / 2;
    const double* b = params_.data() + params_.size() - n_classes_;

    Slice<double> out{input.index, height, width, n_classes_, {}};
    out.data.resize(n_classes_ * height * width);
    for (std::size_t c = 0; c < n_classes_; ++c) {
        std::fill_n(&out.at(c, 0, 0), height * width, b[c]);
        for (std::size_t m = 0; m < modalities_; ++m)
            for (std::size_t dy = 0; dy < patch_; ++dy) {
                const auto [h0, h1] = tap_range(dy, r, height);
                for (std::size_t dx = 0; dx < patch_; ++dx) {
                    const auto [w0, w1] = tap_range(dx, r, width);
                    const double k = params_[weight_index(c, m, dy, dx)];
                    for (std::size_t h = h0; h < h1; ++h) {
                        double* dst = &out.at(c, h, 0);
                        const float* src = &input.at(m, h + dy - r, 0);
                        for (std::size_t w = w0; w < w1; ++w)
                            dst[w] += k * src[w + dx - r];
                    }
                }
            }
    }
    return out;
}

SliceStack<double> ToySegmenter::logits(const SliceStack<float>& input) const
{
    SliceStack<double> out{input.view, input.source_dims, n_classes_, {}};
    out.slices.reserve(input.slices.size());
    for (const Slice<float>& s : input.slices)
        out.slices.push_back(logits(s));
    return out;
}

SliceStack<double> ToySegmenter::forward(const SliceStack<float>& input) const
{
    SliceStack<double> out = logits(input);
    for (Slice<double>& s : out.slices) {
        const ProbVolume z({1, s.height, s.width}, s.channels, std::move(s.data));
        ProbVolume p = softmax(z);
        s.data.assign(p.data().begin(), p.data().end());
    }
    return out;
}

void ToySegmenter::accumulate_gradient(const Slice<float>& input, const Slice<double>& grad_logits,
                                       std::span<double> grad) const
{
    check_input(input);
    if (grad.size() != params_.size())
        fail(ErrorCode::DimMismatch, "gradient buffer has wrong size");
    if (grad_logits.height != input.height || grad_logits.width != input.width ||
        grad_logits.channels != n_classes_)
        fail(ErrorCode::DimMismatch, "logit gradient does not match input slice");

    const std::size_t height = input.height, width = input.width;
    const std::size_t r = patch_ / 2;
    double* db = grad.data() + params_.size() - n_classes_;
    for (std::size_t c = 0; c < n_classes_; ++c) {
        const double* g = &grad_logits.at(c, 0, 0);
        double bsum = 0.0;
        for (std::size_t e = 0; e < height * width; ++e)
            bsum += g[e];
        db[c] += bsum;
        for (std::size_t m = 0; m < modalities_; ++m)
            for (std::size_t dy = 0; dy < patch_; ++dy) {
                const auto [h0, h1] = tap_range(dy, r, height);
                for (std::size_t dx = 0; dx < patch_; ++dx) {
                    const auto [w0, w1] = tap_range(dx, r, width);
                    double acc = 0.0;
                    for (std::size_t h = h0; h < h1; ++h) {
                        const double* gr = &grad_logits.at(c, h, 0);
                        const float* src = &input.at(m, h + dy - r, 0);
                        for (std::size_t w = w0; w < w1; ++w)
                            acc += gr[w] * src[w + dx - r];
                    }
                    grad[weight_index(c, m, dy, dx)] += acc;
                }
            }
    }
}

void save_checkpoint(const std::filesystem::path& path, const ToySegmenter& model)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(kCheckpointMagic, 4);
    detail::write_le<std::uint32_t>(out, kCheckpointVersion);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.patch()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.modalities()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.n_classes()));
    for (double p : model.parameters())
        detail::write_le<double>(out, p);
    if (!out)
        fail(ErrorCode::IoFailure, "failed writing " + path.string());
}

ToySegmenter load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoFailure, "cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || !std::equal(magic, magic + 4, kCheckpointMagic))
        fail(ErrorCode::BadMagic, path.string() + " is not a segmenter checkpoint");
    const auto version = detail::read_le<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion)
        fail(ErrorCode::UnsupportedDtype, "checkpoint version " + std::to_string(version) + " not supported");
    const auto patch = detail::read_le<std::uint32_t>(in, "patch");
    const auto modalities = detail::read_le<std::uint32_t>(in, "modalities");
    const auto classes = detail::read_le<std::uint32_t>(in, "n_classes");
    ToySegmenter model(patch, modalities, classes);
    for (double& p : model.parameters())
        p = detail::read_le<double>(in, "parameters");
    if (in.peek() != std::char_traits<char>::eof())
        fail(ErrorCode::LengthMismatch, path.string() + " has trailing bytes");
    return model;
}

} // namespace mvfuse
