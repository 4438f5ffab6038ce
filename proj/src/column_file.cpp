#include "forgetq/column_file.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>

#include "forgetq/errors.hpp"

namespace forgetq::columns {

static_assert(std::endian::native == std::endian::little, "column files assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'Q', 'C', 'O', 'L', '0', '0', '1'};
constexpr std::size_t kHeaderBytes = 64;
constexpr std::size_t kTableEntryBytes = 16;

std::uint32_t crc(const char* data, std::size_t len, std::uint32_t seed = 0) {
    uLong c = seed;
    while (len > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
        c = crc32(c, reinterpret_cast<const Bytef*>(data), chunk);
        data += chunk;
        len -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

// Serializes header + segment table + data and writes the file in one pass.
std::uint32_t write_column(const std::filesystem::path& path, ValueKind kind, std::uint64_t count,
                           std::string_view data) {
    const std::size_t n_segments = (data.size() + kSegmentBytes - 1) / kSegmentBytes;
    std::string head;
    head.reserve(kHeaderBytes + n_segments * kTableEntryBytes);
    head.append(kMagic, sizeof kMagic);
    put<std::uint32_t>(head, kFormatVersion);
    put<std::uint32_t>(head, static_cast<std::uint32_t>(kind));
    put<std::uint64_t>(head, count);
    put<std::uint64_t>(head, data.size());
    put<std::uint64_t>(head, n_segments);
    put<std::uint64_t>(head, kSegmentBytes);
    put<std::uint32_t>(head, crc(head.data(), head.size()));
    head.resize(kHeaderBytes, '\0');
    for (std::size_t s = 0; s < n_segments; ++s) {
        const std::size_t off = s * kSegmentBytes;
        const std::size_t len = std::min(kSegmentBytes, data.size() - off);
        put<std::uint64_t>(head, off);
        put<std::uint32_t>(head, static_cast<std::uint32_t>(len));
        put<std::uint32_t>(head, crc(data.data() + off, len));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot create column file " + path.string());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + path.string());
    return crc(data.data(), data.size(), crc(head.data(), head.size()));
}

}  // namespace

std::uint32_t write_int64(const std::filesystem::path& path, std::span<const std::int64_t> values) {
    const std::string_view data(reinterpret_cast<const char*>(values.data()),
                                values.size() * sizeof(std::int64_t));
    return write_column(path, ValueKind::kInt64, values.size(), data);
}

std::uint32_t write_strings(const std::filesystem::path& path, const StringColumn& values) {
    std::string data;
    data.reserve(values.offsets.size() * 8 + values.bytes.size());
    data.append(reinterpret_cast<const char*>(values.offsets.data()),
                values.offsets.size() * sizeof(std::uint64_t));
    data.append(values.bytes);
    return write_column(path, ValueKind::kString, values.size(), data);
}

std::uint32_t write_bytes(const std::filesystem::path& path, std::string_view bytes) {
    return write_column(path, ValueKind::kBytes, bytes.size(), bytes);
}

std::uint32_t file_crc32(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::array<char, 1 << 16> buf;
    std::uint32_t c = 0;
    while (in) {
        in.read(buf.data(), buf.size());
        c = crc(buf.data(), static_cast<std::size_t>(in.gcount()), c);
    }
    return c;
}

ColumnReader::ColumnReader(const std::filesystem::path& path, IoCounters* io)
    : path_(path), in_(path, std::ios::binary), io_(io) {
    if (!in_) throw DataError("cannot open column file " + path.string());
    if (io_) ++io_->files_opened;
    char head[kHeaderBytes];
    in_.read(head, kHeaderBytes);
    if (in_.gcount() != static_cast<std::streamsize>(kHeaderBytes) ||
        std::memcmp(head, kMagic, sizeof kMagic) != 0) {
        throw DataError("not a column file: " + path.string());
    }
    constexpr std::size_t kCrcPos = 8 + 4 + 4 + 8 + 8 + 8 + 8;
    if (get<std::uint32_t>(head + kCrcPos) != crc(head, kCrcPos)) {
        throw DataError("header checksum mismatch in " + path.string());
    }
    if (get<std::uint32_t>(head + 8) != kFormatVersion) {
        throw DataError("unsupported column format version in " + path.string());
    }
    kind_ = static_cast<ValueKind>(get<std::uint32_t>(head + 12));
    count_ = get<std::uint64_t>(head + 16);
    data_bytes_ = get<std::uint64_t>(head + 24);
    const auto n_segments = get<std::uint64_t>(head + 32);
    if (get<std::uint64_t>(head + 40) != kSegmentBytes) {
        throw DataError("unexpected segment size in " + path.string());
    }
    std::string table(n_segments * kTableEntryBytes, '\0');
    in_.read(table.data(), static_cast<std::streamsize>(table.size()));
    if (static_cast<std::size_t>(in_.gcount()) != table.size()) {
        throw DataError("truncated segment table in " + path.string());
    }
    segments_.resize(n_segments);
    for (std::size_t s = 0; s < n_segments; ++s) {
        const char* p = table.data() + s * kTableEntryBytes;
        segments_[s] = {get<std::uint64_t>(p), get<std::uint32_t>(p + 8), get<std::uint32_t>(p + 12)};
    }
    data_start_ = kHeaderBytes + table.size();
    if (io_) io_->bytes_read += kHeaderBytes + table.size();
}

void ColumnReader::read_segment(std::size_t index, char* dest) {
    const Segment& seg = segments_.at(index);
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(data_start_ + seg.offset));
    in_.read(dest, seg.length);
    if (in_.gcount() != static_cast<std::streamsize>(seg.length)) {
        throw DataError("truncated column data in " + path_.string());
    }
    if (crc(dest, seg.length) != seg.crc) {
        throw DataError("segment checksum mismatch in " + path_.string() + " (segment " +
                        std::to_string(index) + ")");
    }
    if (io_) {
        ++io_->segments_read;
        io_->bytes_read += seg.length;
    }
}

std::string ColumnReader::read_data_range(std::uint64_t offset, std::uint64_t length) {
    if (offset + length > data_bytes_) throw DataError("read past end of " + path_.string());
    std::string out;
    if (length == 0) return out;
    const std::size_t first = offset / kSegmentBytes;
    const std::size_t last = (offset + length - 1) / kSegmentBytes;
    std::string seg_buf(kSegmentBytes, '\0');
    out.reserve(length);
    for (std::size_t s = first; s <= last; ++s) {
        read_segment(s, seg_buf.data());
        const std::uint64_t seg_start = segments_[s].offset;
        const std::uint64_t from = std::max(offset, seg_start) - seg_start;
        const std::uint64_t to = std::min<std::uint64_t>(offset + length, seg_start + segments_[s].length) - seg_start;
        out.append(seg_buf.data() + from, to - from);
    }
    return out;
}

std::vector<std::int64_t> ColumnReader::read_int64() {
    if (kind_ != ValueKind::kInt64) throw DataError("not an integer column: " + path_.string());
    std::vector<std::int64_t> values(count_);
    const std::string raw = read_data_range(0, data_bytes_);
    if (raw.size() != count_ * sizeof(std::int64_t)) throw DataError("size mismatch in " + path_.string());
    if (!raw.empty()) std::memcpy(values.data(), raw.data(), raw.size());
    return values;
}

std::vector<std::int64_t> ColumnReader::read_int64_at(std::span<const std::size_t> rows) {
    if (kind_ != ValueKind::kInt64) throw DataError("not an integer column: " + path_.string());
    std::vector<std::int64_t> values;
    values.reserve(rows.size());
    std::string seg_buf(kSegmentBytes, '\0');
    std::size_t loaded = SIZE_MAX;
    for (const std::size_t row : rows) {
        if (row >= count_) throw DataError("row index out of range in " + path_.string());
        const std::uint64_t byte = row * sizeof(std::int64_t);
        const std::size_t seg = byte / kSegmentBytes;
        if (seg != loaded) {
            read_segment(seg, seg_buf.data());
            loaded = seg;
        }
        values.push_back(get<std::int64_t>(seg_buf.data() + (byte - segments_[seg].offset)));
    }
    return values;
}

StringColumn ColumnReader::read_strings() {
    if (kind_ != ValueKind::kString) throw DataError("not a string column: " + path_.string());
    const std::string raw = read_data_range(0, data_bytes_);
    const std::size_t offset_bytes = (count_ + 1) * sizeof(std::uint64_t);
    if (raw.size() < offset_bytes) throw DataError("truncated string column " + path_.string());
    StringColumn col;
    col.offsets.resize(count_ + 1);
    std::memcpy(col.offsets.data(), raw.data(), offset_bytes);
    col.bytes = raw.substr(offset_bytes);
    if (col.offsets.front() != 0 || col.offsets.back() != col.bytes.size() ||
        !std::is_sorted(col.offsets.begin(), col.offsets.end())) {
        throw DataError("corrupt string offsets in " + path_.string());
    }
    return col;
}

std::string ColumnReader::read_bytes() {
    if (kind_ != ValueKind::kBytes) throw DataError("not a bytes column: " + path_.string());
    return read_data_range(0, data_bytes_);
}

std::string ColumnReader::read_byte_range(std::uint64_t offset, std::uint64_t length) {
    if (kind_ != ValueKind::kBytes) throw DataError("not a bytes column: " + path_.string());
    return read_data_range(offset, length);
}

}  // namespace forgetq::columns
