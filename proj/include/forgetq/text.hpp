#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace forgetq::text {

/// Post HTML reduced to visible text, with entities decoded.
struct StrippedHtml {
    std::string all;    // every visible character, code included
    std::string prose;  // text outside <code> elements
    std::string code;   // text inside <code> elements
};

StrippedHtml strip_html(std::string_view html);

/// Number of UTF-8 code points (bytes that are not continuation bytes).
std::size_t utf8_length(std::string_view s);

/// Lowercase, split on non-alphanumeric, drop tokens shorter than two bytes.
/// Bytes >= 0x80 are kept inside tokens.
std::vector<std::string> tokenize(std::string_view s);

struct PosCounts {
    std::int64_t verbs = 0;
    std::int64_t pronouns = 0;
    std::int64_t nouns = 0;

    bool operator==(const PosCounts&) const = default;
};

/// Lexicon + suffix tagger over alphabetic words:
/// pronoun list -> PRP; function-word list -> other; verb list -> verb;
/// noun list -> noun; -ing/-ed/-ize/-ise -> verb; -tion/-ness/-ment -> noun;
/// anything else -> noun.
PosCounts count_pos(std::string_view text);

/// Version tag of the shipped lexicon files.
std::string_view lexicon_version();

}  // namespace forgetq::text
