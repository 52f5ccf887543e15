#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvfuse/error.hpp"

namespace mvfuse {

inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::size_t kNumModalities = 4;

/// Voxel extents in canonical (z, y, x) order; x varies fastest in memory.
struct Dims {
    std::size_t z = 0;
    std::size_t y = 0;
    std::size_t x = 0;

    constexpr std::size_t voxels() const noexcept { return z * y * x; }
    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& dims);

/// Axial fixes z, Coronal fixes y, Sagittal fixes x.
enum class ViewAxis : std::uint8_t { Axial = 0, Coronal = 1, Sagittal = 2 };

inline constexpr std::array<ViewAxis, 3> kAllViews{ViewAxis::Axial, ViewAxis::Coronal,
                                                   ViewAxis::Sagittal};

std::string_view to_string(ViewAxis view) noexcept;
std::optional<ViewAxis> parse_view(std::string_view name) noexcept;

inline constexpr std::size_t view_index(ViewAxis view) noexcept
{
    return static_cast<std::size_t>(view);
}

/// Extent of the axis a view holds fixed.
std::size_t slice_count(const Dims& dims, ViewAxis view) noexcept;

/// (height, width) of one slice of `dims` seen from `view`.
std::pair<std::size_t, std::size_t> slice_shape(const Dims& dims, ViewAxis view) noexcept;

/// Dense multi-channel 3D field, stored channel-planar: ((c * Z + z) * Y + y) * X + x.
template <typename T>
class Volume {
public:
    using value_type = T;

    Volume() = default;

    Volume(Dims dims, std::size_t channels, T fill = T{})
        : dims_(dims), channels_(channels), data_(dims.voxels() * channels, fill)
    {
    }

    Volume(Dims dims, std::size_t channels, std::vector<T> data)
        : dims_(dims), channels_(channels), data_(std::move(data))
    {
        if (data_.size() != dims_.voxels() * channels_)
            fail(ErrorCode::LengthMismatch, "volume data length " + std::to_string(data_.size()) +
                                                " does not match " + to_string(dims_) + " x " +
                                                std::to_string(channels_));
    }

    const Dims& dims() const noexcept { return dims_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t voxels() const noexcept { return dims_.voxels(); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    std::span<T> channel(std::size_t c) noexcept
    {
        return std::span<T>(data_).subspan(c * voxels(), voxels());
    }
    std::span<const T> channel(std::size_t c) const noexcept
    {
        return std::span<const T>(data_).subspan(c * voxels(), voxels());
    }

    std::size_t index(std::size_t c, std::size_t z, std::size_t y, std::size_t x) const noexcept
    {
        return ((c * dims_.z + z) * dims_.y + y) * dims_.x + x;
    }

    T& at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) noexcept
    {
        return data_[index(c, z, y, x)];
    }
    const T& at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) const noexcept
    {
        return data_[index(c, z, y, x)];
    }

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    Dims dims_{};
    std::size_t channels_ = 0;
    std::vector<T> data_;
};

/// Multi-modal MRI intensities (Flair, T1, T1c, T2 as channels).
using IntensityVolume = Volume<float>;
/// Per-voxel class distributions; also used for logits and gradients over logits.
using ProbVolume = Volume<double>;
/// Single-channel class ids.
using LabelVolume = Volume<std::uint8_t>;

/// Throws InvalidDistribution unless every voxel holds a distribution (entries in [0,1], sum 1 +- tol).
void validate_distribution(const ProbVolume& prob, double tol = 1e-6);
/// Throws InvalidDistribution if any label is >= n_classes or the volume has more than one channel.
void validate_labels(const LabelVolume& labels, std::size_t n_classes = kNumClasses);

/// Per-modality z-score. With `nonzero_only` the statistics use only nonzero voxels and
/// zero voxels stay exactly zero.
IntensityVolume zscore_normalize(const IntensityVolume& vol, bool nonzero_only = true);

/// Zero-extends at the high-index end of every axis.
template <typename T>
Volume<T> pad_to(const Volume<T>& vol, const Dims& target);

/// Keeps the low-index corner of size `target`.
template <typename T>
Volume<T> crop_to(const Volume<T>& vol, const Dims& target);

/// Sub-volume holding slices [first, first + count) along the axis `view` fixes.
template <typename T>
Volume<T> crop_slab(const Volume<T>& vol, ViewAxis view, std::size_t first, std::size_t count);

/// One 2D slice, channel-planar: data[(c * height + h) * width + w].
template <typename T>
struct Slice {
    std::size_t index = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<T> data;

    T& at(std::size_t c, std::size_t h, std::size_t w) noexcept
    {
        return data[(c * height + h) * width + w];
    }
    const T& at(std::size_t c, std::size_t h, std::size_t w) const noexcept
    {
        return data[(c * height + h) * width + w];
    }

    friend bool operator==(const Slice&, const Slice&) = default;
};

/// All slices of a volume along one view, in slice-index order.
template <typename T>
struct SliceStack {
    ViewAxis view = ViewAxis::Axial;
    Dims source_dims{};
    std::size_t channels = 0;
    std::vector<Slice<T>> slices;

    std::size_t expected_slices() const noexcept { return slice_count(source_dims, view); }
};

template <typename T>
SliceStack<T> extract_slices(const Volume<T>& vol, ViewAxis view);

/// Inverse of extract_slices. Throws InconsistentStack on missing, duplicate or misshapen slices.
template <typename T>
Volume<T> assemble_volume(const SliceStack<T>& stack);

/// In-plane bilinear resize (half-pixel centres, edge clamped).
Slice<double> resize_bilinear(const Slice<double>& slice, std::size_t height, std::size_t width);
SliceStack<double> resize_bilinear(const SliceStack<double>& stack, const Dims& target_dims);

} // namespace mvfuse
