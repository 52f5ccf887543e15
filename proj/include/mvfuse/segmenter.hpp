#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mvfuse/volume.hpp"

namespace mvfuse {

/// Linear per-voxel classifier over a p x p in-plane patch of all modalities, followed by a
/// softmax. Patches are zero-padded at slice borders.
///
/// Parameter layout: weights indexed [class][modality][dy][dx], then one bias per class.
class ToySegmenter {
public:
    ToySegmenter() = default;
    ToySegmenter(std::size_t patch, std::size_t modalities, std::size_t n_classes);

    /// Weights drawn from N(0, stddev^2), biases zero.
    static ToySegmenter random(std::size_t patch, std::size_t modalities, std::size_t n_classes,
                               std::uint64_t seed, double stddev);

    std::size_t patch() const noexcept { return patch_; }
    std::size_t modalities() const noexcept { return modalities_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    double& weight(std::size_t cls, std::size_t modality, std::size_t dy, std::size_t dx) noexcept;
    double& bias(std::size_t cls) noexcept;

    Slice<double> logits(const Slice<float>& input) const;
    SliceStack<double> logits(const SliceStack<float>& input) const;

    /// Per-voxel class probabilities.
    SliceStack<double> forward(const SliceStack<float>& input) const;

    /// Adds d loss / d parameters for one slice given d loss / d logits on that slice.
    void accumulate_gradient(const Slice<float>& input, const Slice<double>& grad_logits,
                             std::span<double> grad) const;

    friend bool operator==(const ToySegmenter&, const ToySegmenter&) = default;

private:
    std::size_t weight_index(std::size_t cls, std::size_t modality, std::size_t dy, std::size_t dx) const noexcept
    {
        return ((cls * modalities_ + modality) * patch_ + dy) * patch_ + dx;
    }

    void check_input(const Slice<float>& input) const;

    std::size_t patch_ = 0;
    std::size_t modalities_ = 0;
    std::size_t n_classes_ = 0;
    std::vector<double> params_;
};

/// Checkpoint layout (little-endian): "MVTS", u32 version, u32 patch, u32 modalities,
/// u32 n_classes, then every parameter as f64.
void save_checkpoint(const std::filesystem::path& path, const ToySegmenter& model);
ToySegmenter load_checkpoint(const std::filesystem::path& path);

} // namespace mvfuse
