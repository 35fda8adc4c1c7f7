#pragma once

#include <cstdint>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ppgfm/errors.hpp"

namespace ppgfm {

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string to_hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write file: " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InvalidInput("short write: " + path);
}

inline std::uint64_t fnv1a64_file(const std::string& path) { return fnv1a64(read_file(path)); }

// Comment lines prepended to every CLI output file so a run can be replayed:
// configuration hash, seed and (when applicable) checkpoint hash.
struct ReproHeader {
    std::string config_hash;
    std::string seed;
    std::string checkpoint_hash;

    std::string render() const {
        std::string out;
        if (!config_hash.empty()) out += "# config_hash=" + config_hash + "\n";
        if (!seed.empty()) out += "# seed=" + seed + "\n";
        if (!checkpoint_hash.empty()) out += "# checkpoint_hash=" + checkpoint_hash + "\n";
        return out;
    }
};

// 32-bit IEEE-754 little-endian packing, independent of host byte order.
inline void append_f32_le(std::string& out, float v) {
    std::uint32_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, sizeof(u));
    out.push_back(static_cast<char>(u & 0xff));
    out.push_back(static_cast<char>((u >> 8) & 0xff));
    out.push_back(static_cast<char>((u >> 16) & 0xff));
    out.push_back(static_cast<char>((u >> 24) & 0xff));
}

inline float read_f32_le(const char* data) {
    const auto* b = reinterpret_cast<const unsigned char*>(data);
    const std::uint32_t u = static_cast<std::uint32_t>(b[0]) |
                            (static_cast<std::uint32_t>(b[1]) << 8) |
                            (static_cast<std::uint32_t>(b[2]) << 16) |
                            (static_cast<std::uint32_t>(b[3]) << 24);
    float v;
    std::memcpy(&v, &u, sizeof(v));
    return v;
}

// Shortest decimal forms that round-trip exactly.
inline std::string format_float(float v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace ppgfm
