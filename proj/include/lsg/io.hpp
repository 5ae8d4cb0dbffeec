#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsg/field.hpp"

namespace lsg {

/// Malformed field file. `offset` is the byte position where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& message, std::size_t offset);
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// LSF1 layout: "LSF1", width (u32 LE), height (u32 LE), then width*height
/// IEEE-754 binary32 values, little endian, row-major. Values are narrowed
/// to float on write, so encode(decode(bytes)) == bytes always holds and
/// decode(encode(f)) == f for float-representable fields.
std::vector<std::uint8_t> encode_lsf1(const ScalarField& f);
ScalarField decode_lsf1(std::span<const std::uint8_t> bytes);

/// PGM P5, maxval <= 255. Import scales each sample to value / maxval.
/// Export maps [lo, hi] linearly onto [0, 255] (clamped, rounded to nearest)
/// and records the mapping as a "# lsg-rescale lo=.. hi=.." header comment.
std::vector<std::uint8_t> encode_pgm(const ScalarField& f, double lo, double hi);
ScalarField decode_pgm(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Dispatches on extension: ".pgm" uses PGM, anything else LSF1.
ScalarField load_field(const std::filesystem::path& path);
/// PGM export uses the field's own min/max unless it already lies in [0, 1].
void save_field(const ScalarField& f, const std::filesystem::path& path);

}  // namespace lsg
