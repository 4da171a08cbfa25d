#include "owr/binary_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "owr/error.hpp"

namespace owr::io {
namespace {

template <typename UInt>
UInt to_little(UInt value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    UInt out = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      out = static_cast<UInt>((out << 8) | ((value >> (8 * i)) & 0xFFu));
    }
    return out;
  }
}

template <typename UInt>
void put(std::ostream& out, UInt value) {
  const UInt le = to_little(value);
  out.write(reinterpret_cast<const char*>(&le), sizeof(le));
  if (!out) throw Error("write failed");
}

template <typename UInt>
UInt get(std::istream& in, std::string_view what) {
  UInt raw = 0;
  in.read(reinterpret_cast<char*>(&raw), sizeof(raw));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(raw))) {
    throw FormatError("unexpected end of file while reading " + std::string(what));
  }
  return to_little(raw);
}

}  // namespace

void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!out) throw Error("write failed");
}

void write_u32(std::ostream& out, std::uint32_t value) { put(out, value); }

void write_f32(std::ostream& out, float value) { put(out, std::bit_cast<std::uint32_t>(value)); }

void write_f64(std::ostream& out, double value) { put(out, std::bit_cast<std::uint64_t>(value)); }

void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
  std::string buf(magic.size(), '\0');
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || buf != magic) {
    throw FormatError(std::string(what) + ": bad magic, expected \"" + std::string(magic) + "\"");
  }
}

std::uint32_t read_u32(std::istream& in, std::string_view what) {
  return get<std::uint32_t>(in, what);
}

float read_f32(std::istream& in, std::string_view what) {
  return std::bit_cast<float>(get<std::uint32_t>(in, what));
}

double read_f64(std::istream& in, std::string_view what) {
  return std::bit_cast<double>(get<std::uint64_t>(in, what));
}

}  // namespace owr::io
