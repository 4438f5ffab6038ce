#include "forgetq/text.hpp"

#include <algorithm>
#include <charconv>
#include <string>
#include <unordered_set>

#include "lexicon_data.hpp"

namespace forgetq::text {

namespace {

bool ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool ascii_digit(char c) { return c >= '0' && c <= '9'; }
char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

void append_utf8(std::uint32_t cp, std::string& out) {
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

// Decodes one HTML character reference starting at s[i] == '&'. Unknown
// references are copied through literally.
std::size_t decode_reference(std::string_view s, std::size_t i, std::string& out) {
    const std::size_t semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
        out.push_back('&');
        return i + 1;
    }
    const std::string_view ref = s.substr(i + 1, semi - i - 1);
    if (ref == "lt") out.push_back('<');
    else if (ref == "gt") out.push_back('>');
    else if (ref == "amp") out.push_back('&');
    else if (ref == "quot") out.push_back('"');
    else if (ref == "apos") out.push_back('\'');
    else if (ref == "nbsp") out.push_back(' ');
    else if (ref.size() >= 2 && ref[0] == '#') {
        const bool hex = ref[1] == 'x' || ref[1] == 'X';
        std::uint32_t cp = 0;
        const char* first = ref.data() + (hex ? 2 : 1);
        const char* last = ref.data() + ref.size();
        const auto res = std::from_chars(first, last, cp, hex ? 16 : 10);
        if (res.ec != std::errc{} || res.ptr != last || first == last || cp > 0x10FFFF) {
            out.push_back('&');
            return i + 1;
        }
        append_utf8(cp, out);
    } else {
        out.push_back('&');
        return i + 1;
    }
    return semi + 1;
}

std::unordered_set<std::string> load_words(std::string_view data) {
    std::unordered_set<std::string> words;
    std::size_t start = 0;
    while (start < data.size()) {
        std::size_t end = data.find('\n', start);
        if (end == std::string_view::npos) end = data.size();
        std::string_view line = data.substr(start, end - start);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        if (!line.empty() && line.front() != '#') words.emplace(line);
        start = end + 1;
    }
    return words;
}

struct Lexicon {
    std::unordered_set<std::string> pronouns = load_words(lexicon::kPronouns);
    std::unordered_set<std::string> function_words = load_words(lexicon::kFunctionWords);
    std::unordered_set<std::string> verbs = load_words(lexicon::kVerbs);
    std::unordered_set<std::string> nouns = load_words(lexicon::kNouns);
};

const Lexicon& shared_lexicon() {
    static const Lexicon lex;
    return lex;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() > suffix.size() + 1 && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

StrippedHtml strip_html(std::string_view html) {
    StrippedHtml out;
    int code_depth = 0;
    std::size_t i = 0;
    std::string decoded;
    while (i < html.size()) {
        const char c = html[i];
        if (c == '<') {
            const std::size_t gt = html.find('>', i);
            if (gt == std::string_view::npos) break;  // truncated tag: drop the rest
            std::string_view tag = html.substr(i + 1, gt - i - 1);
            const bool closing = !tag.empty() && tag.front() == '/';
            if (closing) tag.remove_prefix(1);
            std::size_t n = 0;
            while (n < tag.size() && (ascii_alpha(tag[n]) || ascii_digit(tag[n]))) ++n;
            std::string name(tag.substr(0, n));
            std::transform(name.begin(), name.end(), name.begin(), lower);
            if (name == "code") {
                if (closing) code_depth = std::max(0, code_depth - 1);
                else if (tag.empty() || tag.back() != '/') ++code_depth;
            }
            out.prose.push_back(' ');
            i = gt + 1;
            continue;
        }
        decoded.clear();
        if (c == '&') {
            i = decode_reference(html, i, decoded);
        } else {
            decoded.push_back(c);
            ++i;
        }
        out.all += decoded;
        (code_depth > 0 ? out.code : out.prose) += decoded;
    }
    return out;
}

std::size_t utf8_length(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= 2) tokens.push_back(cur);
        cur.clear();
    };
    for (const char c : s) {
        if (ascii_alpha(c) || ascii_digit(c) || static_cast<unsigned char>(c) >= 0x80) {
            cur.push_back(lower(c));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

PosCounts count_pos(std::string_view s) {
    const Lexicon& lex = shared_lexicon();
    PosCounts counts;
    std::string word;
    auto tag = [&] {
        if (word.empty()) return;
        if (lex.pronouns.contains(word)) {
            ++counts.pronouns;
        } else if (lex.function_words.contains(word)) {
            // neither
        } else if (lex.verbs.contains(word)) {
            ++counts.verbs;
        } else if (lex.nouns.contains(word)) {
            ++counts.nouns;
        } else if (ends_with(word, "ing") || ends_with(word, "ed") || ends_with(word, "ize") ||
                   ends_with(word, "ise")) {
            ++counts.verbs;
        } else {
            // -tion/-ness/-ment and every unknown word are nouns.
            ++counts.nouns;
        }
        word.clear();
    };
    for (const char c : s) {
        if (ascii_alpha(c)) {
            word.push_back(lower(c));
        } else {
            tag();
        }
    }
    tag();
    return counts;
}

std::string_view lexicon_version() { return lexicon::kVersion; }

}  // namespace forgetq::text
