#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forgetq/errors.hpp"
#include "forgetq/records.hpp"
#include "forgetq/xml_rows.hpp"

namespace forgetq {

struct ParseWarning {
    std::uint64_t offset = 0;
    std::string message;
};

/// Thrown in strict mode on the first bad row.
class ParseError : public DataError {
public:
    ParseError(std::uint64_t offset, const std::string& message);
    [[nodiscard]] std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

struct ParseOptions {
    bool strict = false;
    /// Warnings beyond this many are counted but not kept.
    std::size_t max_kept_warnings = 1000;
    std::size_t chunk_bytes = 1 << 16;
};

struct ParseStats {
    std::uint64_t rows = 0;
    std::uint64_t records = 0;
    std::uint64_t skipped_other_type = 0;  // posts with PostTypeId not 1 or 2
    std::uint64_t warning_count = 0;
    std::vector<ParseWarning> warnings;
};

namespace detail {

class ReaderBase {
public:
    ReaderBase(std::istream& in, ParseOptions options);

    [[nodiscard]] const ParseStats& stats() const { return stats_; }
    [[nodiscard]] std::size_t peak_buffer_bytes() const { return rows_.peak_buffer_bytes(); }

protected:
    /// Next well-formed row, or nullptr at end. Malformed rows become warnings.
    const xml::Row* next_row();
    void warn(std::uint64_t offset, std::string message);

    xml::RowReader rows_;
    xml::Row row_;
    ParseOptions options_;
    ParseStats stats_;
};

}  // namespace detail

/// Streams question and answer records from a Posts file in file order.
class PostReader : public detail::ReaderBase {
public:
    /// Records created after `dump_time` are rejected when it is given.
    PostReader(std::istream& in, std::optional<Timestamp> dump_time, ParseOptions options = {});
    std::optional<PostRecord> next();

private:
    std::optional<Timestamp> dump_time_;
};

class UserReader : public detail::ReaderBase {
public:
    explicit UserReader(std::istream& in, ParseOptions options = {});
    std::optional<UserRecord> next();
};

class TagReader : public detail::ReaderBase {
public:
    explicit TagReader(std::istream& in, ParseOptions options = {});
    std::optional<TagRecord> next();
};

/// Splits "<a><b>" or "a|b" into lowercase tag names.
std::vector<std::string> split_tags(std::string_view text);

/// Eager helpers for small inputs and tests.
std::vector<PostRecord> parse_posts(std::istream& in, std::optional<Timestamp> dump_time,
                                    ParseStats* stats = nullptr, ParseOptions options = {});
std::vector<UserRecord> parse_users(std::istream& in, ParseStats* stats = nullptr,
                                    ParseOptions options = {});
std::vector<TagRecord> parse_tags(std::istream& in, ParseStats* stats = nullptr,
                                  ParseOptions options = {});

}  // namespace forgetq
