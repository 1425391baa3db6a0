#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

#include "lrcl/error.hpp"

namespace lrcl::detail {

// Little-endian encoding helpers shared by the checkpoint and dataset containers.

template <typename U>
void put_le(std::string& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

inline void put_i32(std::string& out, std::int32_t v) { put_le(out, static_cast<std::uint32_t>(v)); }

inline void put_floats(std::string& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
  } else {
    for (float f : values) put_le(out, std::bit_cast<std::uint32_t>(f));
  }
}

/// Bounds-checked cursor over an in-memory file image.
class Reader {
 public:
  Reader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  std::string_view take(std::size_t n) {
    if (n > remaining()) {
      throw CorruptionError(what_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                            std::to_string(pos_) + ", " + std::to_string(remaining()) + " available)");
    }
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename U>
  U get_le() {
    auto s = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }

  std::int32_t get_i32() { return static_cast<std::int32_t>(get_le<std::uint32_t>()); }

  void get_floats(std::span<float> out) {
    auto s = take(out.size() * sizeof(float));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), s.data(), s.size());
    } else {
      Reader inner(s, what_);
      for (float& f : out) f = std::bit_cast<float>(inner.get_le<std::uint32_t>());
    }
  }

 private:
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace lrcl::detail
