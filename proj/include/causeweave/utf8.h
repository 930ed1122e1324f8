#pragma once

#include <cstddef>
#include <string>
#include <string_view>

// Char offsets throughout the project count Unicode scalar values, so
// annotations survive multi-byte text.
namespace causeweave::utf8 {

// Throws FormatError on ill-formed UTF-8.
std::u32string decode(std::string_view text);
std::string encode(std::u32string_view chars);

std::size_t length(std::string_view text);

// Substring by char offsets [start, end). Throws std::out_of_range.
std::string slice(std::string_view text, std::size_t start, std::size_t end);

bool is_space(char32_t c);

}  // namespace causeweave::utf8
