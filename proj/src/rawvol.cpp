#include "mvfuse/rawvol.hpp"

#include <fstream>
#include <iterator>
#include <limits>
#include <vector>

#include "mvfuse/detail/byteio.hpp"

namespace mvfuse {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'F', '1'};

std::uint32_t narrow(std::size_t v, const char* what)
{
    if (v > std::numeric_limits<std::uint32_t>::max())
        fail(ErrorCode::InvalidConfig, std::string(what) + " does not fit the RAWVOL header");
    return static_cast<std::uint32_t>(v);
}

template <typename Stored, typename T>
void write_impl(const std::filesystem::path& path, const Volume<T>& vol, RawDtype dtype)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dtype));
    detail::write_le<std::uint32_t>(out, narrow(vol.channels(), "channel count"));
    detail::write_le<std::uint32_t>(out, narrow(vol.dims().z, "Z"));
    detail::write_le<std::uint32_t>(out, narrow(vol.dims().y, "Y"));
    detail::write_le<std::uint32_t>(out, narrow(vol.dims().x, "X"));

    std::vector<Stored> buf;
    buf.reserve(vol.size());
    for (T v : vol.data())
        buf.push_back(detail::to_little(static_cast<Stored>(v)));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(Stored)));
    if (!out)
        fail(ErrorCode::IoFailure, "failed writing " + path.string());
}

std::vector<unsigned char> slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoFailure, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RawVolHeader parse_header(std::span<const unsigned char> bytes, const std::filesystem::path& path)
{
    if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, reinterpret_cast<const char*>(bytes.data())))
        fail(ErrorCode::BadMagic, path.string() + " is not a RAWVOL file");
    if (bytes.size() < kRawVolHeaderBytes)
        fail(ErrorCode::LengthMismatch, path.string() + ": header truncated");
    const bool swap = std::endian::native != std::endian::little;
    RawVolHeader h;
    const auto code = detail::load<std::uint32_t>(bytes, 4, swap);
    if (code > 2)
        fail(ErrorCode::UnsupportedDtype, path.string() + ": unknown dtype code " + std::to_string(code));
    h.dtype = static_cast<RawDtype>(code);
    h.channels = detail::load<std::uint32_t>(bytes, 8, swap);
    h.dims = {detail::load<std::uint32_t>(bytes, 12, swap), detail::load<std::uint32_t>(bytes, 16, swap),
              detail::load<std::uint32_t>(bytes, 20, swap)};
    if (h.channels == 0)
        fail(ErrorCode::LengthMismatch, path.string() + ": zero channels");
    const std::size_t payload = bytes.size() - kRawVolHeaderBytes;
    if (payload != h.payload_bytes())
        fail(ErrorCode::LengthMismatch, path.string() + ": payload has " + std::to_string(payload) +
                                            " bytes, header implies " + std::to_string(h.payload_bytes()));
    return h;
}

template <typename Stored, typename T>
Volume<T> decode(std::span<const unsigned char> bytes, const RawVolHeader& h)
{
    const bool swap = std::endian::native != std::endian::little;
    std::vector<T> values(h.channels * h.dims.voxels());
    for (std::size_t i = 0; i < values.size(); ++i)
        values[i] = static_cast<T>(detail::load<Stored>(bytes, kRawVolHeaderBytes + i * sizeof(Stored), swap));
    return Volume<T>(h.dims, h.channels, std::move(values));
}

const char* dtype_name(RawDtype d)
{
    switch (d) {
    case RawDtype::Label: return "u8 labels";
    case RawDtype::Intensity: return "f32 intensity";
    case RawDtype::Probability: return "f32 probability";
    }
    return "unknown";
}

template <typename T>
T expect(AnyVolume any, RawDtype want, const std::filesystem::path& path)
{
    if (auto* v = std::get_if<T>(&any))
        return std::move(*v);
    fail(ErrorCode::UnsupportedDtype, path.string() + ": expected " + dtype_name(want));
}

} // namespace

void write_rawvol(const std::filesystem::path& path, const LabelVolume& vol)
{
    write_impl<std::uint8_t>(path, vol, RawDtype::Label);
}

void write_rawvol(const std::filesystem::path& path, const IntensityVolume& vol)
{
    write_impl<float>(path, vol, RawDtype::Intensity);
}

void write_rawvol(const std::filesystem::path& path, const ProbVolume& vol)
{
    write_impl<float>(path, vol, RawDtype::Probability);
}

RawVolHeader read_rawvol_header(const std::filesystem::path& path)
{
    const std::vector<unsigned char> bytes = slurp(path);
    return parse_header(bytes, path);
}

AnyVolume read_rawvol(const std::filesystem::path& path)
{
    const std::vector<unsigned char> bytes = slurp(path);
    const RawVolHeader h = parse_header(bytes, path);
    switch (h.dtype) {
    case RawDtype::Label: return decode<std::uint8_t, std::uint8_t>(bytes, h);
    case RawDtype::Intensity: return decode<float, float>(bytes, h);
    case RawDtype::Probability: return decode<float, double>(bytes, h);
    }
    fail(ErrorCode::UnsupportedDtype, path.string() + ": unknown dtype");
}

LabelVolume read_rawvol_labels(const std::filesystem::path& path)
{
    return expect<LabelVolume>(read_rawvol(path), RawDtype::Label, path);
}

IntensityVolume read_rawvol_intensity(const std::filesystem::path& path)
{
    return expect<IntensityVolume>(read_rawvol(path), RawDtype::Intensity, path);
}

ProbVolume read_rawvol_probabilities(const std::filesystem::path& path)
{
    return expect<ProbVolume>(read_rawvol(path), RawDtype::Probability, path);
}

} // namespace mvfuse
