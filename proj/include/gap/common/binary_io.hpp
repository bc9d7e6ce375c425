#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace gap::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace detail {
template <typename T>
T byteswap_if_big(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}
}  // namespace detail

/// Writes a trivially copyable value in little-endian byte order.
template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    T le = detail::byteswap_if_big(value);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, std::string_view what) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw std::runtime_error("truncated input while reading " + std::string(what));
    }
    return detail::byteswap_if_big(v);
}

inline void write_string(std::ostream& out, std::string_view s) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::string_view what, std::size_t max_len = 1u << 20) {
    auto n = read_le<std::uint32_t>(in, what);
    if (n > max_len) {
        throw std::runtime_error("implausible string length while reading " + std::string(what));
    }
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) {
        throw std::runtime_error("truncated input while reading " + std::string(what));
    }
    return s;
}

inline void expect_magic(std::istream& in, std::string_view magic, std::string_view path) {
    std::string got(magic.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (!in || got != magic) {
        throw std::runtime_error(std::string(path) + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
}

}  // namespace gap::io
