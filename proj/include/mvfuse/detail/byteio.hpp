#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "mvfuse/error.hpp"

namespace mvfuse::detail {

template <typename T>
T byteswap(T value) noexcept
{
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

template <typename T>
T from_little(T value) noexcept
{
    if constexpr (std::endian::native == std::endian::little)
        return value;
    else
        return byteswap(value);
}

template <typename T>
T to_little(T value) noexcept
{
    return from_little(value);
}

template <typename T>
void write_le(std::ostream& out, T value)
{
    value = to_little(value);
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& what)
{
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
        fail(ErrorCode::TruncatedFile, "unexpected end of file while reading " + what);
    return from_little(value);
}

/// Reads `T` from a raw byte buffer at `offset`, optionally swapping byte order.
template <typename T>
T load(std::span<const unsigned char> bytes, std::size_t offset, bool swap) noexcept
{
    T value{};
    std::memcpy(&value, bytes.data() + offset, sizeof(T));
    return swap ? byteswap(value) : value;
}

} // namespace mvfuse::detail
