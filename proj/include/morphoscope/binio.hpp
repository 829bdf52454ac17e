#pragma once

// Little-endian primitives for the checkpoint container.

#include "morphoscope/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace morphoscope::binio {

inline void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) {
    b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) {
    b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(b, 8);
}

inline void put_f32s(std::ostream& out, std::span<const float> xs) {
  for (float x : xs) {
    put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
}

inline void put_bytes(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void raw(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw IoError("checkpoint truncated");
    }
  }

  std::uint8_t u8() {
    char b;
    raw(&b, 1);
    return static_cast<std::uint8_t>(b);
  }

  std::uint32_t u32() {
    unsigned char b[4];
    raw(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | b[i];
    }
    return v;
  }

  std::uint64_t u64() {
    unsigned char b[8];
    raw(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
      v = (v << 8) | b[i];
    }
    return v;
  }

  void f32s(std::span<float> dst) {
    for (float& x : dst) {
      x = std::bit_cast<float>(u32());
    }
  }

  std::string bytes(std::size_t limit = 1u << 26) {
    const std::uint32_t n = u32();
    if (n > limit) {
      throw FormatError("checkpoint: string block of " + std::to_string(n) + " bytes is implausible");
    }
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace morphoscope::binio
