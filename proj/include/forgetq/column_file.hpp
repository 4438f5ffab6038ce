#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forgetq::columns {

// On-disk column layout, little-endian:
//
//   header   64 bytes   magic "FQCOL001", format version, value kind, row
//                       count, data bytes, segment count, segment size,
//                       header crc32, zero padding
//   table    16 bytes per segment: data offset (u64), byte length (u32), crc32 (u32)
//   data     raw values, split into fixed 32 KiB segments
//
// Integer columns hold 8-byte values, so row i lives in segment 8*i / 32768.
// String columns hold (count + 1) u64 offsets followed by the bytes.

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kSegmentBytes = 32 * 1024;
inline constexpr std::int64_t kNone = 0;  // absent optional id
inline constexpr std::int64_t kNoTime = INT64_MIN;  // absent optional timestamp

enum class ValueKind : std::uint32_t { kInt64 = 1, kString = 2, kBytes = 3 };

/// Reads performed through ColumnReader, for verifying that selective queries
/// stay selective.
struct IoCounters {
    std::uint64_t files_opened = 0;
    std::uint64_t segments_read = 0;
    std::uint64_t bytes_read = 0;
};

struct StringColumn {
    std::vector<std::uint64_t> offsets{0};
    std::string bytes;

    [[nodiscard]] std::size_t size() const { return offsets.size() - 1; }
    [[nodiscard]] std::string_view at(std::size_t i) const {
        return std::string_view(bytes).substr(offsets[i], offsets[i + 1] - offsets[i]);
    }
    void push_back(std::string_view s) {
        bytes.append(s);
        offsets.push_back(bytes.size());
    }
    bool operator==(const StringColumn&) const = default;
};

/// Writes a column and returns the crc32 of the complete file.
std::uint32_t write_int64(const std::filesystem::path& path, std::span<const std::int64_t> values);
std::uint32_t write_strings(const std::filesystem::path& path, const StringColumn& values);
std::uint32_t write_bytes(const std::filesystem::path& path, std::string_view bytes);

std::uint32_t file_crc32(const std::filesystem::path& path);

/// Random-access reader. Every segment read is checksum-verified; failures
/// throw DataError.
class ColumnReader {
public:
    ColumnReader(const std::filesystem::path& path, IoCounters* io = nullptr);

    [[nodiscard]] ValueKind kind() const { return kind_; }
    [[nodiscard]] std::uint64_t count() const { return count_; }

    std::vector<std::int64_t> read_int64();
    /// Values at the given row indices (ascending), touching only the
    /// segments that contain them.
    std::vector<std::int64_t> read_int64_at(std::span<const std::size_t> rows);
    StringColumn read_strings();
    std::string read_bytes();
    /// Byte range [offset, offset + length) of a bytes column.
    std::string read_byte_range(std::uint64_t offset, std::uint64_t length);

private:
    struct Segment {
        std::uint64_t offset;
        std::uint32_t length;
        std::uint32_t crc;
    };

    void read_segment(std::size_t index, char* dest);
    std::string read_data_range(std::uint64_t offset, std::uint64_t length);

    std::filesystem::path path_;
    std::ifstream in_;
    IoCounters* io_;
    ValueKind kind_{};
    std::uint64_t count_ = 0;
    std::uint64_t data_bytes_ = 0;
    std::uint64_t data_start_ = 0;
    std::vector<Segment> segments_;
};

}  // namespace forgetq::columns
