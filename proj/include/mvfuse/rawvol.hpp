#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>

#include "mvfuse/volume.hpp"

namespace mvfuse {

/// RAWVOL layout, all little-endian: "MVF1", u32 dtype, u32 channels, u32 Z, u32 Y, u32 X,
/// then the channel-planar payload with x fastest.
enum class RawDtype : std::uint32_t { Label = 0, Intensity = 1, Probability = 2 };

inline constexpr std::size_t kRawVolHeaderBytes = 24;

struct RawVolHeader {
    RawDtype dtype = RawDtype::Intensity;
    std::uint32_t channels = 1;
    Dims dims;

    std::size_t element_bytes() const noexcept { return dtype == RawDtype::Label ? 1 : 4; }
    std::size_t payload_bytes() const noexcept { return element_bytes() * channels * dims.voxels(); }
};

using AnyVolume = std::variant<LabelVolume, IntensityVolume, ProbVolume>;

void write_rawvol(const std::filesystem::path& path, const LabelVolume& vol);
void write_rawvol(const std::filesystem::path& path, const IntensityVolume& vol);
/// Probabilities are stored as f32.
void write_rawvol(const std::filesystem::path& path, const ProbVolume& vol);

RawVolHeader read_rawvol_header(const std::filesystem::path& path);
AnyVolume read_rawvol(const std::filesystem::path& path);

/// Typed readers; a file of another dtype is rejected with UnsupportedDtype.
LabelVolume read_rawvol_labels(const std::filesystem::path& path);
IntensityVolume read_rawvol_intensity(const std::filesystem::path& path);
ProbVolume read_rawvol_probabilities(const std::filesystem::path& path);

} // namespace mvfuse
