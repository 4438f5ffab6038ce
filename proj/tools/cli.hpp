#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "forgetq/dump_ingest.hpp"
#include "forgetq/snapshot_store.hpp"

namespace forgetq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

/// Runs one command line (args excludes the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct DumpFiles {
    std::filesystem::path posts;
    std::filesystem::path users;
    std::filesystem::path tags;
};

struct IngestCounts {
    std::uint64_t questions = 0;
    std::uint64_t answers = 0;
    std::uint64_t users = 0;
    std::uint64_t tags = 0;
    std::uint64_t skipped_rows = 0;  // other post types
    std::uint64_t warnings = 0;
    std::size_t peak_buffer_bytes = 0;
};

/// Streams the three files into one snapshot of `store`. Nothing is written
/// unless every file parses.
IngestCounts ingest_files(const DumpFiles& files, Timestamp dump_time, SnapshotStore& store,
                          WriteOptions write_options = {}, ParseOptions parse_options = {});

/// "# forgetq <version> config=<crc32 hex of the canonical config text>"
std::string header_comment(const std::string& canonical_config);

}  // namespace forgetq::cli
