#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stgnp/core/array.hpp"
#include "stgnp/core/errors.hpp"

namespace stgnp::io {

// All on-disk numbers are little-endian 64-bit, written explicitly so the
// format does not depend on host byte order.

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64_le(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64_le(os, bits);
}

inline double read_f64_le(std::istream& is) {
    const std::uint64_t bits = read_u64_le(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

inline void write_i64_le(std::ostream& os, std::int64_t v) {
    write_u64_le(os, static_cast<std::uint64_t>(v));
}

inline std::int64_t read_i64_le(std::istream& is) {
    return static_cast<std::int64_t>(read_u64_le(is));
}

// Array container: 16-byte magic block (8-byte tag, 1 dtype byte, 7 padding),
// then u64 ndim, ndim u64 dims, then the payload.
inline constexpr char kArrayMagic[8] = {'S', 'T', 'G', 'N', 'P', 'A', 'R', 'R'};
inline constexpr unsigned char kDtypeF64 = 0;
inline constexpr unsigned char kDtypeI64 = 1;

inline void write_array_header(std::ostream& os, unsigned char dtype,
                               const std::vector<std::size_t>& shape) {
    os.write(kArrayMagic, 8);
    os.put(static_cast<char>(dtype));
    for (int i = 0; i < 7; ++i) os.put('\0');
    write_u64_le(os, shape.size());
    for (std::size_t d : shape) write_u64_le(os, d);
}

inline std::vector<std::size_t> read_array_header(std::istream& is, unsigned char expected_dtype,
                                                  const std::string& what) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kArrayMagic, 8) != 0)
        throw format_error(what + ": bad array magic");
    const int dtype = is.get();
    char pad[7];
    is.read(pad, 7);
    if (dtype != expected_dtype) throw format_error(what + ": unexpected dtype");
    const std::uint64_t ndim = read_u64_le(is);
    if (ndim > 16) throw format_error(what + ": implausible rank");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = read_u64_le(is);
    if (!is) throw format_error(what + ": truncated header");
    return shape;
}

inline void save_array(const std::filesystem::path& path, const Array& a) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open " + path.string() + " for writing");
    write_array_header(os, kDtypeF64, a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) write_f64_le(os, a[i]);
    if (!os) throw format_error("write failed for " + path.string());
}

inline Array load_array(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open " + path.string());
    auto shape = read_array_header(is, kDtypeF64, path.string());
    Array a(shape);
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] = read_f64_le(is);
    if (!is) throw format_error("truncated array payload in " + path.string());
    return a;
}

inline void save_i64(const std::filesystem::path& path, const std::vector<std::int64_t>& v) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open " + path.string() + " for writing");
    write_array_header(os, kDtypeI64, {v.size()});
    for (std::int64_t x : v) write_i64_le(os, x);
    if (!os) throw format_error("write failed for " + path.string());
}

inline std::vector<std::int64_t> load_i64(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open " + path.string());
    auto shape = read_array_header(is, kDtypeI64, path.string());
    if (shape.size() != 1) throw format_error(path.string() + ": expected rank-1 payload");
    std::vector<std::int64_t> v(shape[0]);
    for (auto& x : v) x = read_i64_le(is);
    if (!is) throw format_error("truncated payload in " + path.string());
    return v;
}

}  // namespace stgnp::io
