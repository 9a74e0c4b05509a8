#pragma once

// CMIF map files.
//
// Binary layout, little-endian:
//   "CMIF"            4 bytes magic
//   version           u32 (currently 1)
//   height, width     u32, u32   extent of the displacement domain
//   origin row, col   i32, i32   displacement of cell (0, 0)
//   mi                h*w float64, row-major
//   n                 h*w uint32
//   valid             h*w uint8
//
// CSV export: header "chi_row,chi_col,mi,n,valid", one row per cell.

#include <cmif/cmif.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace cmif {

inline constexpr std::uint32_t kMapFormatVersion = 1;

class map_format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw map_format_error("cmif map: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
}

}  // namespace detail

inline void write_map(std::ostream& os, const CMIFMap& map) {
    os.write("CMIF", 4);
    detail::put_le<std::uint32_t>(os, kMapFormatVersion);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.domain.extent.height));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.domain.extent.width));
    detail::put_le<std::int32_t>(os, map.domain.origin.row);
    detail::put_le<std::int32_t>(os, map.domain.origin.col);
    for (double v : map.mi.data()) detail::put_le<double>(os, v);
    for (std::uint32_t v : map.n.data()) detail::put_le<std::uint32_t>(os, v);
    for (std::uint8_t v : map.valid.data()) detail::put_le<std::uint8_t>(os, v);
    if (!os) throw std::runtime_error("cmif map: write failed");
}

inline CMIFMap read_map(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "CMIF", 4) != 0) throw map_format_error("cmif map: bad magic");
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kMapFormatVersion) {
        throw map_format_error("cmif map: unsupported version " + std::to_string(version));
    }
    const auto h = detail::get_le<std::uint32_t>(is);
    const auto w = detail::get_le<std::uint32_t>(is);
    if (h == 0 || w == 0 || h > (1u << 20) || w > (1u << 20)) throw map_format_error("cmif map: bad extent");
    CMIFMap map;
    map.domain.extent = {static_cast<int>(h), static_cast<int>(w)};
    map.domain.origin.row = detail::get_le<std::int32_t>(is);
    map.domain.origin.col = detail::get_le<std::int32_t>(is);
    map.mi = Grid<double>(map.domain.extent, 0.0);
    map.n = Grid<std::uint32_t>(map.domain.extent, 0u);
    map.valid = Grid<std::uint8_t>(map.domain.extent, 0);
    for (auto& v : map.mi.data()) v = detail::get_le<double>(is);
    for (auto& v : map.n.data()) v = detail::get_le<std::uint32_t>(is);
    for (auto& v : map.valid.data()) v = detail::get_le<std::uint8_t>(is);
    return map;
}

inline void save_map(const std::string& path, const CMIFMap& map) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_map(os, map);
}

inline CMIFMap load_map(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return read_map(is);
}

inline void write_map_csv(std::ostream& os, const CMIFMap& map) {
    os << "chi_row,chi_col,mi,n,valid\n";
    char buf[64];
    const GridShape e = map.domain.extent;
    for (int r = 0; r < e.height; ++r) {
        for (int c = 0; c < e.width; ++c) {
            const Offset chi = map.domain.shift({r, c});
            std::snprintf(buf, sizeof buf, "%.17g", map.mi(r, c));
            os << chi.row << ',' << chi.col << ',' << buf << ',' << map.n(r, c) << ','
               << static_cast<int>(map.valid(r, c)) << '\n';
        }
    }
}

struct MapComparison {
    bool same_domain = false;
    bool n_identical = false;
    bool valid_identical = false;
    double max_mi_difference = 0.0;  // over cells valid in both
};

inline MapComparison compare_maps(const CMIFMap& a, const CMIFMap& b) {
    MapComparison out;
    out.same_domain = a.domain == b.domain;
    if (!out.same_domain) return out;
    out.n_identical = a.n == b.n;
    out.valid_identical = a.valid == b.valid;
    for (std::size_t i = 0; i < a.mi.size(); ++i) {
        if (a.valid[i] && b.valid[i]) out.max_mi_difference = std::max(out.max_mi_difference, std::abs(a.mi[i] - b.mi[i]));
    }
    return out;
}

// FNV-1a over the integer planes (N and validity).
inline std::uint64_t count_checksum(const CMIFMap& map) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint32_t>(map.domain.extent.height), 4);
    mix(static_cast<std::uint32_t>(map.domain.extent.width), 4);
    for (auto v : map.n.data()) mix(v, 4);
    for (auto v : map.valid.data()) mix(v, 1);
    return h;
}

}  // namespace cmif
