// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

namespace dynsurf {

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);

[[noreturn]] void throw_decode_size_error(std::size_t bytes,
                                          std::size_t elem_size);

// Numeric arrays travel as base64 of their little-endian byte image.
template <class T>
std::string encode_array(const std::vector<T>& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  return base64_encode(reinterpret_cast<const std::uint8_t*>(v.data()),
                       v.size() * sizeof(T));
}

template <class T>
std::vector<T> decode_array(const std::string& text) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::vector<std::uint8_t> bytes = base64_decode(text);
  std::vector<T> out(bytes.size() / sizeof(T));
  if (out.size() * sizeof(T) != bytes.size())
    throw_decode_size_error(bytes.size(), sizeof(T));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace dynsurf
