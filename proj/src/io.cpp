#include "lsg/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace lsg {

FormatError::FormatError(const std::string& message, std::size_t offset)
    : std::runtime_error(message + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

namespace {

constexpr std::size_t kLsfHeader = 12;
constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 31;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    }
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_lsf1(const ScalarField& f) {
    if (f.width() > std::numeric_limits<std::uint32_t>::max() ||
        f.height() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidInput("encode_lsf1: dimensions exceed u32");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kLsfHeader + 4 * f.size());
    out.insert(out.end(), {'L', 'S', 'F', '1'});
    put_u32(out, static_cast<std::uint32_t>(f.width()));
    put_u32(out, static_cast<std::uint32_t>(f.height()));
    for (double v : f.values()) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

ScalarField decode_lsf1(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "LSF1", 4) != 0) {
        throw FormatError("LSF1: bad magic", 0);
    }
    if (bytes.size() < kLsfHeader) {
        throw FormatError("LSF1: truncated header", bytes.size());
    }
    const std::uint32_t w = get_u32(bytes, 4);
    const std::uint32_t h = get_u32(bytes, 8);
    if (w == 0 || h == 0) {
        throw FormatError("LSF1: zero dimension " + std::to_string(w) + "x" + std::to_string(h),
                          4);
    }
    const std::uint64_t count = std::uint64_t{w} * h;
    if (count > kMaxPixels) {
        throw FormatError("LSF1: dimension overflow " + std::to_string(w) + "x" +
                              std::to_string(h),
                          4);
    }
    const std::size_t payload = bytes.size() - kLsfHeader;
    if (payload != 4 * count) {
        throw FormatError("LSF1: expected " + std::to_string(count) + " floats, found " +
                              std::to_string(payload / 4) +
                              (payload % 4 ? " and a partial value" : ""),
                          bytes.size());
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto v = std::bit_cast<float>(get_u32(bytes, kLsfHeader + 4 * i));
        if (!std::isfinite(v)) {
            throw FormatError("LSF1: non-finite value", kLsfHeader + 4 * i);
        }
        data[i] = v;
    }
    return ScalarField(w, h, std::move(data));
}

std::vector<std::uint8_t> encode_pgm(const ScalarField& f, double lo, double hi) {
    if (!(hi > lo)) {
        hi = lo + 1.0;
    }
    std::ostringstream head;
    head.precision(17);
    head << "P5\n# lsg-rescale lo=" << lo << " hi=" << hi << "\n"
         << f.width() << " " << f.height() << "\n255\n";
    const std::string hs = head.str();
    std::vector<std::uint8_t> out(hs.begin(), hs.end());
    out.reserve(out.size() + f.size());
    for (double v : f.values()) {
        const double s = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        out.push_back(static_cast<std::uint8_t>(std::lround(255.0 * s)));
    }
    return out;
}

ScalarField decode_pgm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw FormatError("PGM: bad magic (expected P5)", 0);
    }
    pos = 2;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_uint = [&](const char* what) -> std::uint64_t {
        skip_space();
        const std::size_t start = pos;
        std::uint64_t v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > kMaxPixels) {
                throw FormatError(std::string("PGM: ") + what + " overflow", start);
            }
            ++pos;
        }
        if (pos == start) {
            throw FormatError(std::string("PGM: expected ") + what, start);
        }
        return v;
    };
    const std::uint64_t w = read_uint("width");
    const std::uint64_t h = read_uint("height");
    const std::uint64_t maxval = read_uint("maxval");
    if (w == 0 || h == 0 || w * h > kMaxPixels) {
        throw FormatError("PGM: bad dimensions", 2);
    }
    if (maxval == 0 || maxval > 255) {
        throw FormatError("PGM: only 8-bit maxval (1..255) supported", pos);
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        throw FormatError("PGM: missing separator before raster", pos);
    }
    ++pos;
    const std::size_t count = w * h;
    if (bytes.size() - pos < count) {
        throw FormatError("PGM: expected " + std::to_string(count) + " samples, found " +
                              std::to_string(bytes.size() - pos),
                          bytes.size());
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = static_cast<double>(bytes[pos + i]) / static_cast<double>(maxval);
    }
    return ScalarField(w, h, std::move(data));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed for '" + path.string() + "'");
    }
}

ScalarField load_field(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    if (path.extension() == ".pgm") {
        return decode_pgm(bytes);
    }
    return decode_lsf1(bytes);
}

void save_field(const ScalarField& f, const std::filesystem::path& path) {
    if (path.extension() == ".pgm") {
        double lo = f.min();
        double hi = f.max();
        if (lo >= 0.0 && hi <= 1.0) {
            lo = 0.0;
            hi = 1.0;
        }
        write_bytes(path, encode_pgm(f, lo, hi));
    } else {
        write_bytes(path, encode_lsf1(f));
    }
}

}  // namespace lsg
