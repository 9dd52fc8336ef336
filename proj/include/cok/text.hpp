#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cok/errors.hpp"

namespace cok {

namespace detail {

// Decodes one UTF-8 codepoint at `i`. Invalid sequences are consumed one byte
// at a time and interpreted as Latin-1 so arbitrary bytes never abort.
inline std::uint32_t utf8_next(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    auto cont = [&](std::size_t k) {
        return i + k < s.size() &&
               (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    };
    auto tail = [&](std::size_t k) {
        return static_cast<std::uint32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F);
    };
    if ((b0 & 0xE0) == 0xC0 && cont(1)) {
        std::uint32_t cp = (static_cast<std::uint32_t>(b0 & 0x1F) << 6) | tail(1);
        i += 2;
        return cp;
    }
    if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
        std::uint32_t cp = (static_cast<std::uint32_t>(b0 & 0x0F) << 12) |
                           (tail(1) << 6) | tail(2);
        i += 3;
        return cp;
    }
    if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
        std::uint32_t cp = (static_cast<std::uint32_t>(b0 & 0x07) << 18) |
                           (tail(1) << 12) | (tail(2) << 6) | tail(3);
        i += 4;
        return cp;
    }
    ++i;
    return b0;  // invalid lead byte: Latin-1 passthrough
}

inline void utf8_append(std::string& out, std::uint32_t cp) {
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

inline bool is_space_cp(std::uint32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
           cp == '\v' || cp == 0xA0;
}

struct Composition {
    std::uint32_t base;
    std::uint32_t mark;
    std::uint32_t composed;
};

// Canonical composition for the Latin-1 repertoire: combining grave, acute,
// circumflex, tilde, diaeresis, ring above and cedilla over ASCII bases.
inline constexpr Composition kCompositions[] = {
    {'A', 0x300, 0xC0}, {'E', 0x300, 0xC8}, {'I', 0x300, 0xCC},
    {'O', 0x300, 0xD2}, {'U', 0x300, 0xD9}, {'a', 0x300, 0xE0},
    {'e', 0x300, 0xE8}, {'i', 0x300, 0xEC}, {'o', 0x300, 0xF2},
    {'u', 0x300, 0xF9},
    {'A', 0x301, 0xC1}, {'E', 0x301, 0xC9}, {'I', 0x301, 0xCD},
    {'O', 0x301, 0xD3}, {'U', 0x301, 0xDA}, {'Y', 0x301, 0xDD},
    {'a', 0x301, 0xE1}, {'e', 0x301, 0xE9}, {'i', 0x301, 0xED},
    {'o', 0x301, 0xF3}, {'u', 0x301, 0xFA}, {'y', 0x301, 0xFD},
    {'A', 0x302, 0xC2}, {'E', 0x302, 0xCA}, {'I', 0x302, 0xCE},
    {'O', 0x302, 0xD4}, {'U', 0x302, 0xDB}, {'a', 0x302, 0xE2},
    {'e', 0x302, 0xEA}, {'i', 0x302, 0xEE}, {'o', 0x302, 0xF4},
    {'u', 0x302, 0xFB},
    {'A', 0x303, 0xC3}, {'N', 0x303, 0xD1}, {'O', 0x303, 0xD5},
    {'a', 0x303, 0xE3}, {'n', 0x303, 0xF1}, {'o', 0x303, 0xF5},
    {'A', 0x308, 0xC4}, {'E', 0x308, 0xCB}, {'I', 0x308, 0xCF},
    {'O', 0x308, 0xD6}, {'U', 0x308, 0xDC}, {'a', 0x308, 0xE4},
    {'e', 0x308, 0xEB}, {'i', 0x308, 0xEF}, {'o', 0x308, 0xF6},
    {'u', 0x308, 0xFC}, {'y', 0x308, 0xFF},
    {'A', 0x30A, 0xC5}, {'a', 0x30A, 0xE5},
    {'C', 0x327, 0xC7}, {'c', 0x327, 0xE7},
};

inline std::uint32_t compose(std::uint32_t base, std::uint32_t mark) {
    for (const auto& c : kCompositions) {
        if (c.base == base && c.mark == mark) return c.composed;
    }
    return 0;
}

inline std::uint32_t lower_cp(std::uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    // Latin-1 uppercase block, excluding the multiplication sign.
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    return cp;
}

}  // namespace detail

// Trim, collapse internal whitespace runs to a single space, and compose
// combining diacritics over ASCII bases (the NFC cases reachable without a
// full Unicode database). Case is preserved; idempotent by construction.
inline std::string normalize_surface(std::string_view raw) {
    std::vector<std::uint32_t> cps;
    cps.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size();) {
        cps.push_back(detail::utf8_next(raw, i));
    }
    std::vector<std::uint32_t> composed;
    composed.reserve(cps.size());
    for (std::uint32_t cp : cps) {
        if (!composed.empty()) {
            if (std::uint32_t c = detail::compose(composed.back(), cp)) {
                composed.back() = c;
                continue;
            }
        }
        composed.push_back(cp);
    }
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    bool seen_content = false;
    for (std::uint32_t cp : composed) {
        if (detail::is_space_cp(cp)) {
            pending_space = seen_content;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        detail::utf8_append(out, cp);
        seen_content = true;
    }
    return out;
}

// Comparison key: normalized surface, case-folded (ASCII + Latin-1).
inline std::string fold_key(std::string_view raw) {
    std::string norm = normalize_surface(raw);
    std::string out;
    out.reserve(norm.size());
    for (std::size_t i = 0; i < norm.size();) {
        detail::utf8_append(out, detail::lower_cp(detail::utf8_next(norm, i)));
    }
    return out;
}

// Lowercased alphanumeric word tokens; everything else is a separator.
inline std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    std::string folded = fold_key(text);
    for (char ch : folded) {
        const auto uc = static_cast<unsigned char>(ch);
        if ((uc >= 'a' && uc <= 'z') || (uc >= '0' && uc <= '9') || uc >= 0x80) {
            cur.push_back(ch);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// --- TSV with \t, \\ and \n escapes inside fields ---

inline std::string tsv_escape(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (char ch : field) {
        switch (ch) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

inline std::string tsv_unescape(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (field[i] == '\\' && i + 1 < field.size()) {
            const char next = field[i + 1];
            if (next == 't') {
                out.push_back('\t');
                ++i;
                continue;
            }
            if (next == 'n') {
                out.push_back('\n');
                ++i;
                continue;
            }
            if (next == '\\') {
                out.push_back('\\');
                ++i;
                continue;
            }
        }
        out.push_back(field[i]);
    }
    return out;
}

// Splits on unescaped tabs; fields are returned unescaped.
inline std::vector<std::string> split_tsv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && i + 1 < line.size()) {
            cur.push_back(line[i]);
            cur.push_back(line[i + 1]);
            ++i;
            continue;
        }
        if (line[i] == '\t') {
            fields.push_back(tsv_unescape(cur));
            cur.clear();
            continue;
        }
        cur.push_back(line[i]);
    }
    fields.push_back(tsv_unescape(cur));
    return fields;
}

}  // namespace cok
