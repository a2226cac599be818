#pragma once

// Binary array files: one UTF-8 JSON header line {"shape":[...],"dtype":"f64"},
// a newline, then the values as little-endian IEEE-754 doubles in row-major order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "hyla/dense_array.hpp"

namespace hyla {

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
        return r;
    }
    return v;
}

} // namespace detail

inline std::string array_header(const Shape& shape) {
    nlohmann::json h;
    h["shape"] = shape;
    h["dtype"] = "f64";
    return h.dump();
}

inline void write_array(std::ostream& os, const Array& a) {
    os << array_header(a.shape()) << '\n';
    for (double v : a.values()) {
        const std::uint64_t bits = detail::to_little_endian(std::bit_cast<std::uint64_t>(v));
        char buf[8];
        std::memcpy(buf, &bits, 8);
        os.write(buf, 8);
    }
    if (!os) throw IoError("write_array: stream failure");
}

inline Array read_array(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("read_array: missing header line");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("read_array: bad header: ") + e.what());
    }
    if (!h.contains("shape") || !h["shape"].is_array()) throw IoError("read_array: header lacks shape");
    if (h.value("dtype", "") != "f64") throw IoError("read_array: unsupported dtype");
    Shape shape;
    for (const auto& e : h["shape"]) {
        if (!e.is_number_unsigned()) throw IoError("read_array: shape extents must be non-negative integers");
        shape.push_back(e.get<std::size_t>());
    }
    Array out(shape);
    for (double& v : out.values()) {
        char buf[8];
        if (!is.read(buf, 8)) throw IoError("read_array: truncated data for shape " + shape_string(shape));
        std::uint64_t bits;
        std::memcpy(&bits, buf, 8);
        v = std::bit_cast<double>(detail::to_little_endian(bits));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw IoError("read_array: trailing bytes after data");
    return out;
}

inline void save_array(const std::filesystem::path& path, const Array& a) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_array(os, a);
}

inline Array load_array(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return read_array(is);
}

} // namespace hyla
