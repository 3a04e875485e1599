// SPDX-License-Identifier: Apache-2.0
#include "dynsurf/base64.hpp"

#include "dynsurf/errors.hpp"

namespace dynsurf {

namespace {
constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= len; i += 3) {
    std::uint32_t v = (std::uint32_t(data[i]) << 16) |
                      (std::uint32_t(data[i + 1]) << 8) | data[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i + 1 == len) {
    std::uint32_t v = std::uint32_t(data[i]) << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == len) {
    std::uint32_t v = (std::uint32_t(data[i]) << 16) |
                      (std::uint32_t(data[i + 1]) << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0)
    throw ParseError("base64: length " + std::to_string(text.size()) +
                     " is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2)
          throw ParseError("base64: misplaced padding");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad) throw ParseError("base64: data after padding");
      int d = decode_char(c);
      if (d < 0)
        throw ParseError(std::string("base64: invalid character '") + c + "'");
      v = (v << 6) | std::uint32_t(d);
    }
    out.push_back(std::uint8_t((v >> 16) & 0xff));
    if (pad < 2) out.push_back(std::uint8_t((v >> 8) & 0xff));
    if (pad < 1) out.push_back(std::uint8_t(v & 0xff));
  }
  return out;
}

void throw_decode_size_error(std::size_t bytes, std::size_t elem_size) {
  throw ParseError("array payload of " + std::to_string(bytes) +
                   " bytes is not a multiple of element size " +
                   std::to_string(elem_size));
}

}  // namespace dynsurf
