#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string_view>

namespace owr::io {

// Little-endian primitives shared by every on-disk format.

void write_magic(std::ostream& out, std::string_view magic);
void write_u32(std::ostream& out, std::uint32_t value);
void write_f32(std::ostream& out, float value);
void write_f64(std::ostream& out, double value);

/// Throws owr::FormatError if the next four bytes differ from `magic`.
void expect_magic(std::istream& in, std::string_view magic, std::string_view what);
std::uint32_t read_u32(std::istream& in, std::string_view what);
float read_f32(std::istream& in, std::string_view what);
double read_f64(std::istream& in, std::string_view what);

}  // namespace owr::io
