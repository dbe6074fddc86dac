#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace care::utf8 {

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD one byte at a
/// time so decoding is total.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view cps);

void append(std::string& out, char32_t cp);

/// Byte offset of every code point boundary: result[i] is the byte offset of
/// code point i, result.back() == text.size().
std::vector<std::size_t> boundaries(std::string_view text);

bool is_cjk(char32_t cp) noexcept;

}  // namespace care::utf8
