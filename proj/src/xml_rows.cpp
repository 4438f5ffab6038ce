#include "forgetq/xml_rows.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>

namespace forgetq::xml {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

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

}  // namespace

const std::string* Row::find(std::string_view name) const {
    for (std::size_t i = 0; i < n_attributes; ++i) {
        if (attributes[i].name == name) return &attributes[i].value;
    }
    return nullptr;
}

bool decode_entities(std::string_view in, std::string& out) {
    out.clear();
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        const std::size_t amp = in.find('&', i);
        if (amp == std::string_view::npos) {
            out.append(in.substr(i));
            break;
        }
        out.append(in.substr(i, amp - i));
        const std::size_t semi = in.find(';', amp);
        if (semi == std::string_view::npos || semi - amp > 12) return false;
        const std::string_view ref = in.substr(amp + 1, semi - amp - 1);
        if (ref == "lt") {
            out.push_back('<');
        } else if (ref == "gt") {
            out.push_back('>');
        } else if (ref == "amp") {
            out.push_back('&');
        } else if (ref == "quot") {
            out.push_back('"');
        } else if (ref == "apos") {
            out.push_back('\'');
        } else if (ref.size() >= 2 && ref[0] == '#') {
            std::uint32_t cp = 0;
            const bool hex = ref[1] == 'x' || ref[1] == 'X';
            const char* first = ref.data() + (hex ? 2 : 1);
            const char* last = ref.data() + ref.size();
            const auto res = std::from_chars(first, last, cp, hex ? 16 : 10);
            if (res.ec != std::errc{} || res.ptr != last || first == last || cp > 0x10FFFF) {
                return false;
            }
            append_utf8(cp, out);
        } else {
            return false;
        }
        i = semi + 1;
    }
    return true;
}

std::string escape_attribute(std::string_view in) {
    std::string out;
    out.reserve(in.size() + in.size() / 8);
    for (const char c : in) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\n': out += "&#xA;"; break;
            case '\r': out += "&#xD;"; break;
            case '\t': out += "&#x9;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

RowReader::RowReader(std::istream& in, std::size_t chunk_bytes)
    : in_(in), chunk_(std::max<std::size_t>(chunk_bytes, 64)) {}

// Ensures buf_ holds at least `need_from_pos` bytes past pos_, reading more
// input as required. Consumed bytes before pos_ are dropped first.
bool RowReader::fill(std::size_t need_from_pos) {
    while (buf_.size() - pos_ < need_from_pos) {
        if (eof_) return false;
        if (pos_ > 0) {
            buf_.erase(0, pos_);
            base_offset_ += pos_;
            pos_ = 0;
        }
        const std::size_t old = buf_.size();
        buf_.resize(old + chunk_);
        in_.read(buf_.data() + old, static_cast<std::streamsize>(chunk_));
        const auto got = static_cast<std::size_t>(in_.gcount());
        buf_.resize(old + got);
        peak_buffer_ = std::max(peak_buffer_, buf_.capacity());
        if (got < chunk_) eof_ = true;
    }
    return true;
}

RowReader::Status RowReader::next(Row& row) {
    for (;;) {
        // Find the next markup start.
        std::size_t lt;
        for (;;) {
            lt = buf_.find('<', pos_);
            if (lt != std::string::npos) break;
            pos_ = buf_.size();
            if (!fill(1)) return Status::kEnd;
        }
        pos_ = lt;
        if (!fill(5)) {
            // Trailing fragment shorter than any element.
            pos_ = buf_.size();
            return Status::kEnd;
        }
        const bool is_row = buf_.compare(pos_, 4, "<row") == 0 &&
                            (is_space(buf_[pos_ + 4]) || buf_[pos_ + 4] == '/' || buf_[pos_ + 4] == '>');
        if (!is_row) {
            // Declarations, root element tags, comments, closing tags.
            const bool comment = buf_.compare(pos_, 4, "<!--") == 0;
            std::size_t rel = 1;
            for (;;) {
                const std::size_t gt = comment ? buf_.find("-->", pos_ + rel) : buf_.find('>', pos_ + rel);
                if (gt != std::string::npos) {
                    pos_ = gt + (comment ? 3 : 1);
                    break;
                }
                const std::size_t have = buf_.size() - pos_;
                rel = comment ? std::max<std::size_t>(have, 3) - 2 : have;
                if (!fill(have + 1)) {
                    pos_ = buf_.size();
                    return Status::kEnd;
                }
            }
            continue;
        }

        // Locate the end of the row tag, honouring quoted attribute values.
        std::size_t rel = 4;
        char quote = 0;
        std::size_t end = std::string::npos;
        bool stray_lt = false;
        for (;;) {
            std::size_t scan = pos_ + rel;
            for (; scan < buf_.size(); ++scan) {
                const char c = buf_[scan];
                if (quote) {
                    if (c == quote) {
                        quote = 0;
                    } else if (c == '<') {
                        stray_lt = true;
                        break;
                    }
                } else if (c == '"' || c == '\'') {
                    quote = c;
                } else if (c == '>') {
                    end = scan;
                    break;
                } else if (c == '<') {
                    stray_lt = true;
                    break;
                }
            }
            rel = scan - pos_;
            if (end != std::string::npos || stray_lt) break;
            if (!fill(rel + 1)) {
                issue_ = RowIssue{base_offset_ + pos_, "unterminated row at end of input"};
                pos_ = buf_.size();
                return Status::kMalformed;
            }
        }
        const std::uint64_t offset = base_offset_ + pos_;
        row.offset = offset;
        if (stray_lt) {
            issue_ = RowIssue{offset, "unexpected '<' inside row element"};
            pos_ += rel;  // resume at the stray '<'
            return Status::kMalformed;
        }
        std::string error;
        const std::size_t attr_end = buf_[end - 1] == '/' ? end - 1 : end;
        const bool ok = parse_row(pos_ + 4, attr_end, row, error);
        pos_ = end + 1;
        if (!ok) {
            issue_ = RowIssue{offset, std::move(error)};
            return Status::kMalformed;
        }
        return Status::kRow;
    }
}

bool RowReader::parse_row(std::size_t start, std::size_t end, Row& row, std::string& error) {
    row.n_attributes = 0;
    std::size_t i = start;
    while (i < end) {
        while (i < end && is_space(buf_[i])) ++i;
        if (i >= end) break;
        const std::size_t name_start = i;
        while (i < end && buf_[i] != '=' && !is_space(buf_[i])) ++i;
        const std::size_t name_end = i;
        while (i < end && is_space(buf_[i])) ++i;
        if (name_end == name_start || i >= end || buf_[i] != '=') {
            error = "attribute without value";
            return false;
        }
        ++i;
        while (i < end && is_space(buf_[i])) ++i;
        if (i >= end || (buf_[i] != '"' && buf_[i] != '\'')) {
            error = "unquoted attribute value";
            return false;
        }
        const char quote = buf_[i++];
        const std::size_t value_start = i;
        while (i < end && buf_[i] != quote) ++i;
        if (i >= end) {
            error = "unterminated attribute value";
            return false;
        }
        if (row.n_attributes == row.attributes.size()) row.attributes.emplace_back();
        Attribute& attr = row.attributes[row.n_attributes];
        attr.name.assign(buf_, name_start, name_end - name_start);
        if (!decode_entities(std::string_view(buf_).substr(value_start, i - value_start), attr.value)) {
            error = "bad entity reference in attribute " + attr.name;
            return false;
        }
        ++row.n_attributes;
        ++i;
    }
    return true;
}

}  // namespace forgetq::xml
