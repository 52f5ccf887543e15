#include "mvfuse/nifti.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "mvfuse/detail/byteio.hpp"

namespace mvfuse {

namespace {

constexpr std::size_t kHeaderBytes = 348;

std::vector<unsigned char> slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoFailure, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

NiftiHeader parse_header(std::span<const unsigned char> bytes, const std::filesystem::path& path)
{
    const std::string name = path.string();
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
        fail(ErrorCode::BadMagic, name + " is gzip-compressed; decompress it before reading");
    if (bytes.size() < kHeaderBytes)
        fail(ErrorCode::TruncatedFile, name + ": header has " + std::to_string(bytes.size()) + " of 348 bytes");

    NiftiHeader h;
    const auto sizeof_hdr = detail::load<std::int32_t>(bytes, 0, false);
    if (sizeof_hdr == 348)
        h.byte_swapped = false;
    else if (detail::byteswap(sizeof_hdr) == 348)
        h.byte_swapped = true;
    else
        fail(ErrorCode::BadMagic, name + ": sizeof_hdr is not 348");

    if (!(bytes[344] == 'n' && bytes[345] == '+' && bytes[346] == '1' && bytes[347] == '\0')) {
        if (bytes[344] == 'n' && bytes[345] == 'i' && bytes[346] == '1')
            fail(ErrorCode::BadMagic, name + ": header/image pairs (.hdr/.img) are not supported");
        fail(ErrorCode::BadMagic, name + ": missing NIfTI-1 magic \"n+1\"");
    }

    const bool swap = h.byte_swapped;
    std::int16_t dim[8];
    for (int i = 0; i < 8; ++i)
        dim[i] = detail::load<std::int16_t>(bytes, 40 + 2 * static_cast<std::size_t>(i), swap);
    if (dim[0] != 3)
        fail(ErrorCode::UnsupportedDtype, name + ": only 3D images are supported, dim[0] = " + std::to_string(dim[0]));
    for (int i = 1; i <= 3; ++i)
        if (dim[i] < 1)
            fail(ErrorCode::UnsupportedDtype, name + ": dim[" + std::to_string(i) + "] must be positive");
    h.dims = {static_cast<std::size_t>(dim[3]), static_cast<std::size_t>(dim[2]), static_cast<std::size_t>(dim[1])};

    const auto datatype = detail::load<std::int16_t>(bytes, 70, swap);
    switch (datatype) {
    case 2: h.dtype = NiftiDtype::UInt8; break;
    case 4: h.dtype = NiftiDtype::Int16; break;
    case 16: h.dtype = NiftiDtype::Float32; break;
    default:
        fail(ErrorCode::UnsupportedDtype, name + ": datatype " + std::to_string(datatype) +
                                              " (only uint8, int16, float32 are supported)");
    }

    const float vox_offset = detail::load<float>(bytes, 108, swap);
    if (!(vox_offset >= 0.0f) || !std::isfinite(vox_offset))
        fail(ErrorCode::BadMagic, name + ": invalid vox_offset");
    h.vox_offset = static_cast<std::size_t>(vox_offset);
    if (h.vox_offset < kHeaderBytes)
        h.vox_offset = 352;
    h.scl_slope = detail::load<float>(bytes, 112, swap);
    h.scl_inter = detail::load<float>(bytes, 116, swap);
    if (!std::isfinite(h.scl_slope) || !std::isfinite(h.scl_inter)) {
        h.scl_slope = 0.0f;
        h.scl_inter = 0.0f;
    }
    return h;
}

std::size_t element_bytes(NiftiDtype d)
{
    switch (d) {
    case NiftiDtype::UInt8: return 1;
    case NiftiDtype::Int16: return 2;
    case NiftiDtype::Float32: return 4;
    }
    return 0;
}

// Raw voxel values, before scaling.
std::vector<double> load_values(std::span<const unsigned char> bytes, const NiftiHeader& h,
                                const std::filesystem::path& path)
{
    const std::size_t n = h.dims.voxels();
    const std::size_t size = element_bytes(h.dtype);
    if (bytes.size() < h.vox_offset || bytes.size() - h.vox_offset < n * size)
        fail(ErrorCode::TruncatedFile, path.string() + ": image data needs " + std::to_string(n * size) +
                                           " bytes after offset " + std::to_string(h.vox_offset));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = h.vox_offset + i * size;
        switch (h.dtype) {
        case NiftiDtype::UInt8: out[i] = bytes[at]; break;
        case NiftiDtype::Int16: out[i] = detail::load<std::int16_t>(bytes, at, h.byte_swapped); break;
        case NiftiDtype::Float32: out[i] = detail::load<float>(bytes, at, h.byte_swapped); break;
        }
    }
    return out;
}

IntensityVolume to_intensity(const std::vector<double>& raw, const NiftiHeader& h)
{
    std::vector<float> values(raw.size());
    const bool scaled = h.scl_slope != 0.0f;
    for (std::size_t i = 0; i < raw.size(); ++i)
        values[i] = scaled ? static_cast<float>(raw[i] * h.scl_slope + h.scl_inter) : static_cast<float>(raw[i]);
    return IntensityVolume(h.dims, 1, std::move(values));
}

} // namespace

NiftiHeader read_nifti_header(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoFailure, "cannot open " + path.string());
    std::vector<unsigned char> bytes(kHeaderBytes);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(kHeaderBytes));
    bytes.resize(static_cast<std::size_t>(in.gcount()));
    return parse_header(bytes, path);
}

std::variant<IntensityVolume, LabelVolume> read_nifti(const std::filesystem::path& path)
{
    const NiftiHeader h = read_nifti_header(path);
    if (h.dtype == NiftiDtype::UInt8 && !h.scaled())
        return read_nifti_labels(path);
    return read_nifti_intensity(path);
}

IntensityVolume read_nifti_intensity(const std::filesystem::path& path)
{
    const std::vector<unsigned char> bytes = slurp(path);
    const NiftiHeader h = parse_header(bytes, path);
    return to_intensity(load_values(bytes, h, path), h);
}

LabelVolume read_nifti_labels(const std::filesystem::path& path)
{
    const std::vector<unsigned char> bytes = slurp(path);
    const NiftiHeader h = parse_header(bytes, path);
    const std::vector<double> raw = load_values(bytes, h, path);
    const bool scaled = h.scl_slope != 0.0f;
    std::vector<std::uint8_t> labels(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = scaled ? raw[i] * h.scl_slope + h.scl_inter : raw[i];
        if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v))
            fail(ErrorCode::UnsupportedDtype, path.string() + ": voxel value " + std::to_string(v) +
                                                  " is not a label in [0, 255]");
        labels[i] = static_cast<std::uint8_t>(v);
    }
    return LabelVolume(h.dims, 1, std::move(labels));
}

} // namespace mvfuse
