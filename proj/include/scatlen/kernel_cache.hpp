#pragma once

// Binary cache for Riesz kernel matrices.
//
// Layout (all integers and doubles little-endian):
//   8 bytes   magic "SCLRIESZ"
//   u32       format version (1)
//   u32       dimension d
//   f64       alpha
//   f64 x d   box lower corner
//   f64 x d   box upper corner
//   u64       points per axis n
//   f64       Riesz constant
//   f64 x N^2 entries, row-major, N = n^d

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

#include "scatlen/riesz.hpp"

namespace scatlen {

namespace cache_detail {

inline constexpr char kMagic[8] = {'S', 'C', 'L', 'R', 'I', 'E', 'S', 'Z'};
inline constexpr std::uint32_t kVersion = 1;

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}
inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline bool get_u64(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}
inline bool get_u32(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}
inline bool get_f64(std::istream& is, double& v) {
    std::uint64_t u;
    if (!get_u64(is, u)) return false;
    v = std::bit_cast<double>(u);
    return true;
}

inline void put_descriptor(std::ostream& os, const GridSpec& g) {
    put_u32(os, static_cast<std::uint32_t>(g.dim()));
    put_f64(os, g.alpha());
    for (double x : g.box().lower) put_f64(os, x);
    for (double x : g.box().upper) put_f64(os, x);
    put_u64(os, g.points_per_axis());
}

}  // namespace cache_detail

/// Stable key for (d, alpha, box, n), hex encoded.
inline std::string kernel_cache_key(const GridSpec& g) {
    std::ostringstream os;
    cache_detail::put_descriptor(os, g);
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(os.str());
    return hex.str();
}

inline std::filesystem::path kernel_cache_path(const std::filesystem::path& dir, const GridSpec& g) {
    return dir / ("riesz_" + kernel_cache_key(g) + ".bin");
}

inline void write_kernel_cache(const std::filesystem::path& path, const KernelMatrix& k) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open kernel cache for writing: " + path.string());
    os.write(cache_detail::kMagic, 8);
    cache_detail::put_u32(os, cache_detail::kVersion);
    cache_detail::put_descriptor(os, k.grid());
    cache_detail::put_f64(os, k.constant());
    const auto& m = k.entries();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) cache_detail::put_f64(os, m(i, j));
    if (!os) throw std::runtime_error("failed writing kernel cache: " + path.string());
}

/// Returns nullopt when the file is missing, truncated, or describes a
/// different grid.
inline std::optional<KernelMatrix> read_kernel_cache(const std::filesystem::path& path, const GridSpec& g) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, cache_detail::kMagic, 8) != 0) return std::nullopt;
    std::uint32_t version = 0, dim = 0;
    if (!cache_detail::get_u32(is, version) || version != cache_detail::kVersion) return std::nullopt;
    if (!cache_detail::get_u32(is, dim) || static_cast<int>(dim) != g.dim()) return std::nullopt;
    double alpha = 0.0;
    if (!cache_detail::get_f64(is, alpha) || alpha != g.alpha()) return std::nullopt;
    for (int side = 0; side < 2; ++side) {
        const auto& corner = side == 0 ? g.box().lower : g.box().upper;
        for (double expect : corner) {
            double x;
            if (!cache_detail::get_f64(is, x) || x != expect) return std::nullopt;
        }
    }
    std::uint64_t n = 0;
    if (!cache_detail::get_u64(is, n) || n != g.points_per_axis()) return std::nullopt;
    double constant = 0.0;
    if (!cache_detail::get_f64(is, constant)) return std::nullopt;
    const auto size = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd m(size, size);
    for (Eigen::Index i = 0; i < size; ++i)
        for (Eigen::Index j = 0; j < size; ++j)
            if (!cache_detail::get_f64(is, m(i, j))) return std::nullopt;
    return KernelMatrix(g, std::move(m), constant);
}

/// Loads the kernel from `dir` when cached, otherwise assembles and stores it.
/// An empty dir disables caching.
inline KernelMatrix cached_riesz(const GridSpec& g, const std::filesystem::path& dir, unsigned threads = 1) {
    if (dir.empty()) return assemble_riesz(g, threads);
    const auto path = kernel_cache_path(dir, g);
    if (auto hit = read_kernel_cache(path, g)) return std::move(*hit);
    KernelMatrix k = assemble_riesz(g, threads);
    std::filesystem::create_directories(dir);
    write_kernel_cache(path, k);
    return k;
}

}  // namespace scatlen
