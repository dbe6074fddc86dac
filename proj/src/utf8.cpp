#include "care/utf8.hpp"

namespace care::utf8 {
namespace {

// Returns the number of bytes consumed (>= 1) and writes the code point.
std::size_t decode_one(std::string_view s, std::size_t i, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0 && b0 >= 0xC2) {
            cp = (char32_t(b0 & 0x1F) << 6) | char32_t(c1);
            return 2;
        }
    } else if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) {
            cp = (char32_t(b0 & 0x0F) << 12) | (char32_t(c1) << 6) | char32_t(c2);
            if (cp >= 0x800 && (cp < 0xD800 || cp > 0xDFFF)) return 3;
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
            cp = (char32_t(b0 & 0x07) << 18) | (char32_t(c1) << 12) | (char32_t(c2) << 6) |
                 char32_t(c3);
            if (cp >= 0x10000 && cp <= 0x10FFFF) return 4;
        }
    }
    cp = 0xFFFD;
    return 1;
}

}  // namespace

std::u32string decode(std::string_view text) {
    std::u32string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        char32_t cp;
        i += decode_one(text, i, cp);
        out.push_back(cp);
    }
    return out;
}

void append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string encode(std::u32string_view cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) append(out, cp);
    return out;
}

std::vector<std::size_t> boundaries(std::string_view text) {
    std::vector<std::size_t> out;
    out.reserve(text.size() + 1);
    for (std::size_t i = 0; i < text.size();) {
        out.push_back(i);
        char32_t cp;
        i += decode_one(text, i, cp);
    }
    out.push_back(text.size());
    return out;
}

bool is_cjk(char32_t cp) noexcept {
    return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // unified ideographs
           (cp >= 0x3400 && cp <= 0x4DBF) ||    // extension A
           (cp >= 0x20000 && cp <= 0x2EBEF) ||  // extensions B-F
           (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility ideographs
           (cp >= 0x3000 && cp <= 0x303F) ||    // CJK punctuation
           (cp >= 0x3040 && cp <= 0x30FF) ||    // kana
           (cp >= 0xAC00 && cp <= 0xD7AF) ||    // hangul syllables
           (cp >= 0xFF00 && cp <= 0xFFEF);      // full-width forms
}

}  // namespace care::utf8
