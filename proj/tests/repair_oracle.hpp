#pragma once

// Price-token parser and token-wise repair rule written from their
// definitions, plus a fuzzed token generator.

#include <cctype>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace oracle {

inline bool digits_then_fraction(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == 0) return false;
    if (i == s.size()) return true;
    if (s[i] != '.' && s[i] != ',') return false;
    const std::size_t frac = s.size() - i - 1;
    if (frac < 1 || frac > 2) return false;
    for (std::size_t k = i + 1; k < s.size(); ++k)
        if (!std::isdigit(static_cast<unsigned char>(s[k]))) return false;
    return true;
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::toupper(static_cast<unsigned char>(a[i])) != std::toupper(static_cast<unsigned char>(b[i]))) return false;
    return true;
}

// Price token by direct prefix/suffix stripping.
inline bool price_oracle(std::string_view t) {
    if (digits_then_fraction(t)) return true;
    for (std::string_view c : {"€", "$", "£", "EUR"}) {
        if (t.size() > c.size() && iequals(t.substr(0, c.size()), c) && digits_then_fraction(t.substr(c.size())))
            return true;
        if (t.size() > c.size() && iequals(t.substr(t.size() - c.size()), c) &&
            digits_then_fraction(t.substr(0, t.size() - c.size())))
            return true;
    }
    return false;
}

inline char lookalike_digit(char c) {
    switch (c) {
    case 'I':
    case 'l': return '1';
    case 'O':
    case 'o': return '0';
    case 'S': return '5';
    case 'B': return '8';
    default: return 0;
    }
}

inline std::size_t code_points(std::string_view s) {
    std::size_t n = 0;
    for (char c : s) n += (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    return n;
}

// Token-wise repair written from the rule: prices stay, digit-majority
// tokens with a real digit are mapped and kept only if they become prices.
inline std::string repair_oracle(const std::string& text) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == ' ') {
            out += text[i++];
            continue;
        }
        std::size_t j = text.find(' ', i);
        if (j == std::string::npos) j = text.size();
        const std::string tok = text.substr(i, j - i);
        std::string result = tok;
        if (!price_oracle(tok)) {
            int real = 0, alike = 0;
            std::string mapped = tok;
            for (char& c : mapped) {
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    ++real;
                } else if (char d = lookalike_digit(c)) {
                    ++alike;
                    c = d;
                }
            }
            if (real > 0 && 2 * std::size_t(real + alike) > code_points(tok) && price_oracle(mapped)) result = mapped;
        }
        out += result;
        i = j;
    }
    return out;
}

inline std::string fuzz_token_text(std::mt19937& rng) {
    static const std::vector<std::string> atoms = {"0", "1", "2", "5", "7", "9", "I", "l", "O", "o", "S", "B", ".",
                                                   ",", "€", "$", "EUR", "A", "X", "-", " "};
    std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
    std::uniform_int_distribution<int> len(1, 8);
    std::string s;
    for (int k = len(rng); k > 0; --k) s += atoms[pick(rng)];
    return s;
}

}  // namespace oracle
