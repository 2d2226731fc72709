#pragma once

#include <string>
#include <string_view>

namespace inmt::utf8 {

// Throws FormatError on malformed input.
std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);
std::string encode(char32_t cp);

bool is_valid(std::string_view text);

// Number of code points.
std::size_t length(std::string_view text);

}  // namespace inmt::utf8
