#include "codec.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include "cnet/error.hpp"

namespace cnet::codec {

namespace it = boost::archive::iterators;

namespace {

using ToBase64 = it::base64_from_binary<it::transform_width<std::string::const_iterator, 6, 8>>;
using FromBase64 = it::transform_width<it::binary_from_base64<std::string::const_iterator>, 8, 6>;

void put_le(std::uint64_t bits, char* out) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
}

std::uint64_t get_le(const char* in) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  }
  return bits;
}

}  // namespace

std::string encode_doubles(std::span<const double> values) {
  std::string raw(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    put_le(std::bit_cast<std::uint64_t>(values[i]), raw.data() + 8 * i);
  }
  std::string out(ToBase64(raw.cbegin()), ToBase64(raw.cend()));
  out.append((3 - raw.size() % 3) % 3, '=');
  return out;
}

std::vector<double> decode_doubles(const std::string& text) {
  if (text.size() % 4 != 0) throw FormatError("base64 payload length is not a multiple of 4");
  std::size_t pad = 0;
  while (pad < text.size() && pad < 2 && text[text.size() - 1 - pad] == '=') ++pad;
  for (std::size_t i = 0; i + pad < text.size(); ++i) {
    const char c = text[i];
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                    c == '+' || c == '/';
    if (!ok) throw FormatError("invalid character in base64 payload");
  }
  // binary_from_base64 maps '=' to zero bits; decode the whole string and trim.
  std::string padded = text;
  std::replace(padded.end() - static_cast<std::ptrdiff_t>(pad), padded.end(), '=', 'A');
  std::string raw(FromBase64(padded.cbegin()), FromBase64(padded.cend()));
  raw.resize(raw.size() - pad);
  if (raw.size() % 8 != 0) throw FormatError("base64 payload is not a whole number of float64 values");
  std::vector<double> values(raw.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<double>(get_le(raw.data() + 8 * i));
  }
  return values;
}

}  // namespace cnet::codec
