#pragma once

// Base64 packing of 64-bit float arrays (little-endian byte order) for the
// JSON file formats.

#include <span>
#include <string>
#include <vector>

namespace cnet::codec {

std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(const std::string& text);

}  // namespace cnet::codec
