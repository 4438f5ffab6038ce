#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace forgetq::xml {

struct Attribute {
    std::string name;
    std::string value;  // entity-decoded
};

/// One `<row .../>` element. Storage is reused between rows by RowReader.
struct Row {
    std::uint64_t offset = 0;  // byte offset of '<' in the input stream
    std::size_t n_attributes = 0;
    std::vector<Attribute> attributes;

    [[nodiscard]] const std::string* find(std::string_view name) const;
};

struct RowIssue {
    std::uint64_t offset = 0;
    std::string message;
};

/// Pull tokenizer for the dump layout: a root element holding a flat sequence
/// of self-closing `row` elements. Only the current row is held in memory, so
/// the buffer never grows beyond the largest row plus one read chunk.
class RowReader {
public:
    explicit RowReader(std::istream& in, std::size_t chunk_bytes = 1 << 16);

    enum class Status { kRow, kMalformed, kEnd };

    /// Advances to the next row element. kMalformed means one element was
    /// consumed but could not be parsed; issue() describes it.
    Status next(Row& row);

    [[nodiscard]] const RowIssue& issue() const { return issue_; }

    [[nodiscard]] std::size_t peak_buffer_bytes() const { return peak_buffer_; }
    [[nodiscard]] std::uint64_t bytes_consumed() const { return base_offset_ + pos_; }

private:
    bool fill(std::size_t need_from_pos);
    bool parse_row(std::size_t start, std::size_t end, Row& row, std::string& error);

    std::istream& in_;
    std::size_t chunk_;
    std::string buf_;
    std::size_t pos_ = 0;
    std::uint64_t base_offset_ = 0;  // stream offset of buf_[0]
    bool eof_ = false;
    std::size_t peak_buffer_ = 0;
    RowIssue issue_;
};

/// Decodes the five predefined entities and numeric character references.
/// Returns false on an unknown or malformed reference.
bool decode_entities(std::string_view in, std::string& out);

/// Escapes text for use inside a double-quoted attribute. Control whitespace
/// is written as character references so it survives attribute normalization.
std::string escape_attribute(std::string_view in);

}  // namespace forgetq::xml
