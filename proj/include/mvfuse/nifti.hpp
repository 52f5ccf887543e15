#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>

#include "mvfuse/volume.hpp"

namespace mvfuse {

/// NIfTI-1 datatype codes understood by the reader.
enum class NiftiDtype : std::int16_t { UInt8 = 2, Int16 = 4, Float32 = 16 };

struct NiftiHeader {
    NiftiDtype dtype = NiftiDtype::Float32;
    Dims dims;  // z = dim[3], y = dim[2], x = dim[1]
    std::size_t vox_offset = 352;
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;
    bool byte_swapped = false;

    bool scaled() const noexcept { return scl_slope != 0.0f && !(scl_slope == 1.0f && scl_inter == 0.0f); }
};

/// Single-file, uncompressed, 3D NIfTI-1 only.
NiftiHeader read_nifti_header(const std::filesystem::path& path);

/// Unscaled uint8 images load as labels; everything else as f32 intensities with
/// scl_slope / scl_inter applied.
std::variant<IntensityVolume, LabelVolume> read_nifti(const std::filesystem::path& path);

IntensityVolume read_nifti_intensity(const std::filesystem::path& path);

/// Voxel values must be integers in [0, 255] after scaling.
LabelVolume read_nifti_labels(const std::filesystem::path& path);

} // namespace mvfuse
