#include "treenav/tokens.hpp"

#include <cctype>
#include <sstream>

namespace treenav {

namespace {

bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }

}  // namespace

Tokens tokenize(const std::string& text) {
    Tokens out;
    std::string cur;
    for (unsigned char c : text) {
        if (is_space(c)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else if (is_punct(c)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
            out.push_back(std::string(1, static_cast<char>(c)));
        } else {
            cur.push_back(static_cast<char>(c));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string lower(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

Tokens normalize_tokens(const Tokens& toks) {
    Tokens out;
    out.reserve(toks.size());
    for (const auto& t : toks) {
        std::size_t b = 0, e = t.size();
        while (b < e && is_punct(static_cast<unsigned char>(t[b]))) ++b;
        while (e > b && is_punct(static_cast<unsigned char>(t[e - 1]))) --e;
        if (b == e) continue;
        out.push_back(lower(t.substr(b, e - b)));
    }
    return out;
}

Tokens normalize_text(const std::string& text) {
    return normalize_tokens(tokenize(text));
}

std::string normalize_answer(const std::string& s) {
    std::string no_punct;
    no_punct.reserve(s.size());
    for (unsigned char c : s) {
        if (is_punct(c)) continue;
        no_punct.push_back(
            static_cast<char>(std::tolower(c)));
    }
    std::istringstream in(no_punct);
    std::string tok, out;
    while (in >> tok) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

bool contains_subsequence(const Tokens& haystack, const Tokens& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (haystack[i + j] != needle[j]) {
                match = false;
                break;
            }
        }
        if (match) return true;
    }
    return false;
}

std::string join(const Tokens& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) out.push_back(' ');
        out += toks[i];
    }
    return out;
}

}  // namespace treenav
