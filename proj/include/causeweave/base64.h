#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace causeweave::base64 {

std::string encode(std::span<const std::uint8_t> bytes);

// Standard alphabet, '=' padding required. Throws FormatError.
std::vector<std::uint8_t> decode(std::string_view text);

// Little-endian IEEE-754 binary32 payloads.
std::string encode_floats(std::span<const float> values);
std::vector<float> decode_floats(std::string_view text);

}  // namespace causeweave::base64
